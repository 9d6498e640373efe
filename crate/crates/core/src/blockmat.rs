//! Block-partitioned matrices, their norm compression, and the Gram form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::schatten::{schatten_norm, schatten_norm_compensated, SchattenOrder};

/// An `M x N` grid of blocks. Blocks in one grid row share their height, blocks
/// in one grid column share their width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BlockMatrixJson", into = "BlockMatrixJson")]
pub struct BlockMatrix {
    blocks: Vec<Vec<DenseMatrix>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct BlockMatrixJson {
    block_rows: usize,
    block_cols: usize,
    blocks: Vec<Vec<DenseMatrix>>,
}

impl TryFrom<BlockMatrixJson> for BlockMatrix {
    type Error = Error;

    fn try_from(j: BlockMatrixJson) -> Result<Self> {
        if j.blocks.len() != j.block_rows || j.blocks.iter().any(|r| r.len() != j.block_cols) {
            return Err(Error::ShapeError(format!(
                "declared {}x{} grid does not match the blocks array",
                j.block_rows, j.block_cols
            )));
        }
        BlockMatrix::new(j.blocks)
    }
}

impl From<BlockMatrix> for BlockMatrixJson {
    fn from(b: BlockMatrix) -> Self {
        BlockMatrixJson {
            block_rows: b.block_rows(),
            block_cols: b.block_cols(),
            blocks: b.blocks,
        }
    }
}

impl BlockMatrix {
    pub fn new(blocks: Vec<Vec<DenseMatrix>>) -> Result<Self> {
        let m = blocks.len();
        let n = blocks.first().map(Vec::len).unwrap_or(0);
        if m == 0 || n == 0 {
            return Err(Error::ShapeError("block grid must be at least 1x1".into()));
        }
        if blocks.iter().any(|r| r.len() != n) {
            return Err(Error::ShapeError("ragged block grid".into()));
        }
        for (i, row) in blocks.iter().enumerate() {
            let h = row[0].rows();
            if let Some((j, b)) = row.iter().enumerate().find(|(_, b)| b.rows() != h) {
                return Err(Error::ShapeError(format!(
                    "block ({i},{j}) has {} rows, grid row {i} has height {h}",
                    b.rows()
                )));
            }
        }
        for j in 0..n {
            let w = blocks[0][j].cols();
            if let Some(i) = (0..m).find(|&i| blocks[i][j].cols() != w) {
                return Err(Error::ShapeError(format!(
                    "block ({i},{j}) has {} columns, grid column {j} has width {w}",
                    blocks[i][j].cols()
                )));
            }
        }
        Ok(BlockMatrix { blocks })
    }

    /// Wraps every entry of a flat matrix as a 1x1 block.
    pub fn scalar_blocks(a: &DenseMatrix) -> Self {
        let blocks = (0..a.rows())
            .map(|i| {
                (0..a.cols())
                    .map(|j| DenseMatrix::new(1, 1, vec![a.get(i, j)]).expect("finite entry"))
                    .collect()
            })
            .collect();
        BlockMatrix { blocks }
    }

    /// A 2 x N grid from its two block rows `A_k` and `B_k`.
    pub fn two_row(a: Vec<DenseMatrix>, b: Vec<DenseMatrix>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::ShapeError(format!(
                "{} A-blocks vs {} B-blocks",
                a.len(),
                b.len()
            )));
        }
        Self::new(vec![a, b])
    }

    pub fn block_rows(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_cols(&self) -> usize {
        self.blocks[0].len()
    }

    pub fn block(&self, i: usize, j: usize) -> &DenseMatrix {
        &self.blocks[i][j]
    }

    pub fn blocks(&self) -> &[Vec<DenseMatrix>] {
        &self.blocks
    }

    pub fn row_heights(&self) -> Vec<usize> {
        self.blocks.iter().map(|r| r[0].rows()).collect()
    }

    pub fn col_widths(&self) -> Vec<usize> {
        self.blocks[0].iter().map(DenseMatrix::cols).collect()
    }

    pub fn is_two_row(&self) -> bool {
        self.block_rows() == 2
    }

    /// Applies `f` to every block, keeping the grid. `f` must preserve the
    /// shape invariants.
    pub fn map_blocks<F: FnMut(usize, usize, &DenseMatrix) -> DenseMatrix>(&self, mut f: F) -> Result<Self> {
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(j, b)| f(i, j, b)).collect())
            .collect();
        Self::new(blocks)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("block matrix serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// The flat matrix whose `(i, j)` block is `T_(ij)`.
pub fn assemble(t: &BlockMatrix) -> DenseMatrix {
    let heights = t.row_heights();
    let widths = t.col_widths();
    let mut out = DenseMatrix::zeros(heights.iter().sum(), widths.iter().sum()).into_nalgebra();
    let mut r0 = 0;
    for (i, h) in heights.iter().enumerate() {
        let mut c0 = 0;
        for (j, w) in widths.iter().enumerate() {
            out.view_mut((r0, c0), (*h, *w)).copy_from(t.block(i, j).as_nalgebra());
            c0 += w;
        }
        r0 += h;
    }
    DenseMatrix::from_nalgebra(out).expect("blocks are finite")
}

/// Block-norm matrix `[‖T_(ij)‖_p]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompressionResult {
    pub values: DenseMatrix,
    pub exponent: SchattenOrder,
}

impl CompressionResult {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.re(i, j)
    }
}

pub fn compress(t: &BlockMatrix, p: SchattenOrder) -> Result<CompressionResult> {
    compress_with(t, p, schatten_norm)
}

/// Compression with compensated summation inside each block norm.
pub fn compress_compensated(t: &BlockMatrix, p: SchattenOrder) -> Result<CompressionResult> {
    compress_with(t, p, schatten_norm_compensated)
}

fn compress_with(
    t: &BlockMatrix,
    p: SchattenOrder,
    norm: fn(&DenseMatrix, SchattenOrder) -> Result<f64>,
) -> Result<CompressionResult> {
    let mut vals = Vec::with_capacity(t.block_rows() * t.block_cols());
    for row in t.blocks() {
        for b in row {
            vals.push(norm(b, p)?);
        }
    }
    Ok(CompressionResult {
        values: DenseMatrix::real(t.block_rows(), t.block_cols(), &vals)?,
        exponent: p,
    })
}

/// `TT*` in 2x2 block form next to the compressed matrix it is compared to.
#[derive(Clone, Debug)]
pub struct GramForm {
    /// `[[Σ A_k A_k*, Σ A_k B_k*], [Σ B_k A_k*, Σ B_k B_k*]]`.
    pub g: DenseMatrix,
    /// `[[Σ a_k², Σ a_k b_k], [Σ a_k b_k, Σ b_k²]]` with `a_k = ‖A_k A_k*‖_q^{1/2}`.
    pub compressed: DenseMatrix,
    pub q: SchattenOrder,
}

pub fn gram_form(t: &BlockMatrix, q: SchattenOrder) -> Result<GramForm> {
    if !t.is_two_row() {
        return Err(Error::ShapeError(format!(
            "Gram form needs 2 block rows, got {}",
            t.block_rows()
        )));
    }
    let flat = assemble(t);
    let g = &flat * &flat.adjoint();
    let (mut saa, mut sab, mut sbb) = (0.0, 0.0, 0.0);
    for k in 0..t.block_cols() {
        let a = t.block(0, k);
        let b = t.block(1, k);
        let ak = schatten_norm(&(a * &a.adjoint()), q)?.sqrt();
        let bk = schatten_norm(&(b * &b.adjoint()), q)?.sqrt();
        saa += ak * ak;
        sab += ak * bk;
        sbb += bk * bk;
    }
    let compressed = DenseMatrix::from_real_rows(&[[saa, sab], [sab, sbb]])?;
    Ok(GramForm { g, compressed, q })
}

/// Splits a grid of `d x d` diagonal blocks into the `d` scalar matrices
/// `[a^k_ij]` of their `k`-th diagonal entries. `T` is permutation-similar to
/// their direct sum.
pub fn diagonal_block_reduction(t: &BlockMatrix) -> Result<Vec<DenseMatrix>> {
    let d = t.block(0, 0).rows();
    for (i, row) in t.blocks().iter().enumerate() {
        for (j, b) in row.iter().enumerate() {
            if b.rows() != d || b.cols() != d {
                return Err(Error::DomainError(format!(
                    "block ({i},{j}) is {:?}, expected {d}x{d}",
                    b.shape()
                )));
            }
            for r in 0..d {
                for c in 0..d {
                    let z = b.get(r, c);
                    if r != c && (z.re != 0.0 || z.im != 0.0) {
                        return Err(Error::DomainError(format!(
                            "block ({i},{j}) has off-diagonal entry ({r},{c}) = {z}"
                        )));
                    }
                }
            }
        }
    }
    let (m, n) = (t.block_rows(), t.block_cols());
    Ok((0..d)
        .map(|k| DenseMatrix::from_fn(m, n, |i, j| t.block(i, j).get(k, k)))
        .collect())
}

use nalgebra::DMatrix;

/// Coordinatewise affine map of the training box onto `[0, 1]^d`.
/// Degenerate coordinates keep unit width so they pass through shifted.
#[derive(Debug, Clone, PartialEq)]
pub struct InputScaler {
    pub lower: Vec<f64>,
    pub width: Vec<f64>,
}

impl InputScaler {
    pub fn fit(inputs: &DMatrix<f64>) -> Self {
        let mut lower = Vec::with_capacity(inputs.ncols());
        let mut width = Vec::with_capacity(inputs.ncols());
        for col in inputs.column_iter() {
            let lo = col.min();
            let w = col.max() - lo;
            lower.push(lo);
            width.push(if w > 0.0 { w } else { 1.0 });
        }
        Self { lower, width }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            width: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn scale_into(&self, z: &[f64], out: &mut [f64]) {
        for k in 0..z.len() {
            out[k] = (z[k] - self.lower[k]) / self.width[k];
        }
    }

    pub fn scale(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; z.len()];
        self.scale_into(z, &mut out);
        out
    }

    /// Scaled inputs, one sample per `d`-long chunk.
    pub fn scale_rows(&self, inputs: &DMatrix<f64>) -> Vec<f64> {
        let (n, d) = inputs.shape();
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            for k in 0..d {
                out[i * d + k] = (inputs[(i, k)] - self.lower[k]) / self.width[k];
            }
        }
        out
    }

    /// True when `z` lies inside the training box (with a relative slack).
    pub fn contains(&self, z: &[f64]) -> bool {
        z.iter()
            .zip(self.lower.iter().zip(&self.width))
            .all(|(v, (lo, w))| {
                let u = (v - lo) / w;
                (-1e-9..=1.0 + 1e-9).contains(&u)
            })
    }
}

/// Row-major copy of a matrix.
pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

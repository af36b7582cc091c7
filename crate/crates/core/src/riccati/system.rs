use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Linear network model.
///
/// * dynamics `x' = A x + B u + D w_a`
/// * measurement `y = C x + E w_n` with `N = E E'`
/// * controlled output `z = [H x; G u]`
///
/// The controlled output is stacked, so the cross term `H'G` of the cost is
/// zero by construction and `||z||^2 = |Hx|^2 + |Gu|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// Measurement-noise intensity `N = E E'`.
    pub noise: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

impl SystemMatrices {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Shape and definiteness checks. Structural conditions
    /// (stabilizability, detectability) are in [`Self::check_structure`].
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::invalid("A", "empty system"));
        }
        for (name, m) in [
            ("A", &self.a),
            ("B", &self.b),
            ("C", &self.c),
            ("D", &self.d),
            ("N", &self.noise),
            ("H", &self.h),
            ("G", &self.g),
        ] {
            if m.shape() != (n, n) {
                return Err(Error::invalid(
                    name,
                    format!("expected {n}x{n}, got {}x{}", m.nrows(), m.ncols()),
                ));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(name, "non-finite entry"));
            }
        }
        if !linalg::is_positive_definite(&(self.g.transpose() * &self.g)) {
            return Err(Error::invalid("G", "G'G is not positive definite"));
        }
        if linalg::asymmetry(&self.noise) > 1e-12 || !linalg::is_positive_definite(&self.noise) {
            return Err(Error::invalid("N", "not symmetric positive definite"));
        }
        Ok(())
    }

    /// Stabilizability of `(A, B)`, `(A, D)` and detectability of `(A, H)`, `(A, C)`.
    pub fn check_structure(&self) -> Result<()> {
        if !linalg::is_stabilizable(&self.a, &self.b) {
            return Err(Error::invalid("B", "(A, B) is not stabilizable"));
        }
        if !linalg::is_stabilizable(&self.a, &self.d) {
            return Err(Error::invalid("D", "(A, D) is not stabilizable"));
        }
        if !linalg::is_detectable(&self.a, &self.h) {
            return Err(Error::invalid("H", "(A, H) is not detectable"));
        }
        if !linalg::is_detectable(&self.a, &self.c) {
            return Err(Error::invalid("C", "(A, C) is not detectable"));
        }
        Ok(())
    }

    pub fn control_weight_inverse(&self) -> DMatrix<f64> {
        (self.g.transpose() * &self.g)
            .try_inverse()
            .expect("G'G checked positive definite")
    }

    pub fn noise_inverse(&self) -> DMatrix<f64> {
        self.noise
            .clone()
            .try_inverse()
            .expect("N checked positive definite")
    }

    /// A noise shaping matrix `E` with `E E' = N` (lower Cholesky factor).
    pub fn noise_shaping(&self) -> DMatrix<f64> {
        self.noise
            .clone()
            .cholesky()
            .expect("N checked positive definite")
            .l()
    }

    /// Stacked controlled output `[H x; G u]`.
    pub fn controlled_output(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let n = self.n();
        let mut z = DVector::zeros(2 * n);
        z.rows_mut(0, n).copy_from(&(&self.h * x));
        z.rows_mut(n, n).copy_from(&(&self.g * u));
        z
    }

    /// Zero diagonal and unit column sums, the conservation form of `D`.
    pub fn is_propagation_matrix(&self, tol: f64) -> bool {
        let n = self.n();
        (0..n).all(|j| self.d[(j, j)].abs() <= tol && (self.d.column(j).sum() - 1.0).abs() <= tol)
    }
}

/// Group-biased propagation matrix: zero diagonal, entries within a group
/// weighted `w_in`, across groups `w_out`, each column normalized to sum to 1.
pub fn group_propagation(n: usize, group_size: usize, w_in: f64, w_out: f64) -> DMatrix<f64> {
    assert!(group_size > 0 && n > 1);
    let mut d = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else if i / group_size == j / group_size {
            w_in
        } else {
            w_out
        }
    });
    for mut col in d.column_iter_mut() {
        let s = col.sum();
        col /= s;
    }
    d
}

/// Scalar generators of the reference filtering network.
///
/// `A = a I`, `B = -b I`, `C = c I`, `N = noise I`, `G = g I` and
/// `H = sqrt(cost_ratio) g I`, so `cost_ratio` is the ratio of the squared
/// weights on inbound malware and on filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    pub nodes: usize,
    pub group_size: usize,
    /// Diagonal of `A`; negative (delivered proportion per unit time).
    pub a: f64,
    /// Proportion of filtered packets that are malware; `B = -b I`.
    pub b: f64,
    pub c: f64,
    pub noise_intensity: f64,
    /// Within-group to cross-group propagation weight ratio.
    pub group_bias: f64,
    pub g: f64,
    pub cost_ratio: f64,
    /// Per-node multipliers on the diagonal of `H`, `(node, factor)`.
    pub h_scale: Vec<(usize, f64)>,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            nodes: 9,
            group_size: 3,
            a: -1.0,
            b: 0.5,
            c: 2.0,
            noise_intensity: 1.0,
            group_bias: 4.0,
            g: 1.0,
            cost_ratio: 100.0,
            h_scale: Vec::new(),
        }
    }
}

impl PlantParams {
    pub fn with_cost_ratio(cost_ratio: f64) -> Self {
        Self {
            cost_ratio,
            ..Self::default()
        }
    }

    pub fn h_weight(&self) -> f64 {
        self.cost_ratio.sqrt() * self.g
    }

    pub fn build(&self) -> Result<SystemMatrices> {
        let n = self.nodes;
        if n < 2 {
            return Err(Error::invalid("nodes", "need at least two sub-networks"));
        }
        if self.group_size == 0 {
            return Err(Error::invalid("group_size", "must be positive"));
        }
        if !(self.b > 0.0 && self.b <= 1.0) {
            return Err(Error::invalid(
                "b",
                format!(
                    "{} outside (0, 1]; b = 0 removes the filtering channel",
                    self.b
                ),
            ));
        }
        if !(self.a < 0.0) {
            return Err(Error::invalid("a", "must be negative"));
        }
        if !(self.cost_ratio > 0.0) {
            return Err(Error::invalid("cost_ratio", "must be positive"));
        }
        if !(self.g > 0.0) {
            return Err(Error::invalid("g", "must be positive"));
        }
        if !(self.group_bias > 0.0) {
            return Err(Error::invalid("group_bias", "must be positive"));
        }
        let eye = DMatrix::<f64>::identity(n, n);
        let mut h = &eye * self.h_weight();
        for &(node, factor) in &self.h_scale {
            if node >= n {
                return Err(Error::invalid(
                    "h_scale",
                    format!("node index {node} >= {n}"),
                ));
            }
            if !(factor > 0.0) {
                return Err(Error::invalid("h_scale", "factors must be positive"));
            }
            h[(node, node)] *= factor;
        }
        let sys = SystemMatrices {
            a: &eye * self.a,
            b: &eye * -self.b,
            c: &eye * self.c,
            d: group_propagation(n, self.group_size, self.group_bias, 1.0),
            noise: &eye * self.noise_intensity,
            h,
            g: &eye * self.g,
        };
        sys.validate()?;
        Ok(sys)
    }
}

//! Native test objectives.
//!
//! Formulas follow the CUTEst / OPM definitions. Every function supplies an
//! analytic gradient and Hessian-vector product; none of them ever forms a
//! dense Hessian. Least-squares problems written as `f(x) = Σ rᵢ(x)²` also
//! expose their residuals and Jacobian products so that a Gauss-Newton
//! approximation `2 JᵀJ` can be built.

use std::f64::consts::PI;

use nalgebra::DVector;

/// A smooth objective with analytic first and second derivatives.
pub trait TestFunction: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    fn hess_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;

    /// Residual structure, for objectives of the form `Σ rᵢ(x)²`.
    fn least_squares(&self) -> Option<&dyn LeastSquares> {
        None
    }
}

/// Residual view of an objective `f(x) = Σ rᵢ(x)²`.
pub trait LeastSquares: Send + Sync {
    fn n_residuals(&self) -> usize;

    fn residuals(&self, x: &DVector<f64>) -> DVector<f64>;

    /// `J(x) v`
    fn jac_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;

    /// `J(x)ᵀ w`
    fn jac_t_vec(&self, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64>;
}

/// Chained Rosenbrock.
///
/// `f(x) = Σ_{i<n-1} 100 (x_{i+1} − x_i²)² + (1 − x_i)²`, start
/// `(−1.2, 1, −1.2, 1, …)`. With `n = 2` this is the classical function.
#[derive(Debug, Clone)]
pub struct Rosenbrock {
    pub n: usize,
}

impl Rosenbrock {
    pub fn start(&self) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| if i % 2 == 0 { -1.2 } else { 1.0 })
    }
}

impl TestFunction for Rosenbrock {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        (0..self.n - 1)
            .map(|i| {
                let a = x[i + 1] - x[i] * x[i];
                100.0 * a * a + (1.0 - x[i]).powi(2)
            })
            .sum()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.n);
        for i in 0..self.n - 1 {
            let a = x[i + 1] - x[i] * x[i];
            g[i] += -400.0 * x[i] * a - 2.0 * (1.0 - x[i]);
            g[i + 1] += 200.0 * a;
        }
        g
    }

    fn hess_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for i in 0..self.n - 1 {
            let hii = 1200.0 * x[i] * x[i] - 400.0 * x[i + 1] + 2.0;
            let hij = -400.0 * x[i];
            out[i] += hii * v[i] + hij * v[i + 1];
            out[i + 1] += hij * v[i] + 200.0 * v[i + 1];
        }
        out
    }

    fn least_squares(&self) -> Option<&dyn LeastSquares> {
        Some(self)
    }
}

impl LeastSquares for Rosenbrock {
    fn n_residuals(&self) -> usize {
        2 * (self.n - 1)
    }

    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut r = DVector::zeros(self.n_residuals());
        for i in 0..self.n - 1 {
            r[2 * i] = 10.0 * (x[i + 1] - x[i] * x[i]);
            r[2 * i + 1] = 1.0 - x[i];
        }
        r
    }

    fn jac_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_residuals());
        for i in 0..self.n - 1 {
            out[2 * i] = -20.0 * x[i] * v[i] + 10.0 * v[i + 1];
            out[2 * i + 1] = -v[i];
        }
        out
    }

    fn jac_t_vec(&self, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for i in 0..self.n - 1 {
            out[i] += -20.0 * x[i] * w[2 * i] - w[2 * i + 1];
            out[i + 1] += 10.0 * w[2 * i];
        }
        out
    }
}

/// ARWHEAD: `f(x) = Σ_{i<n-1} (−4 x_i + 3) + (x_i² + x_{n-1}²)²`, start all ones.
#[derive(Debug, Clone)]
pub struct Arwhead {
    pub n: usize,
}

impl TestFunction for Arwhead {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let last = x[self.n - 1];
        (0..self.n - 1)
            .map(|i| {
                let q = x[i] * x[i] + last * last;
                -4.0 * x[i] + 3.0 + q * q
            })
            .sum()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let m = self.n - 1;
        let last = x[m];
        let mut g = DVector::zeros(self.n);
        for i in 0..m {
            let q = x[i] * x[i] + last * last;
            g[i] = -4.0 + 4.0 * q * x[i];
            g[m] += 4.0 * q * last;
        }
        g
    }

    fn hess_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let m = self.n - 1;
        let last = x[m];
        let mut out = DVector::zeros(self.n);
        for i in 0..m {
            let hii = 12.0 * x[i] * x[i] + 4.0 * last * last;
            let hin = 8.0 * x[i] * last;
            let hnn = 4.0 * x[i] * x[i] + 12.0 * last * last;
            out[i] += hii * v[i] + hin * v[m];
            out[m] += hin * v[i] + hnn * v[m];
        }
        out
    }
}

/// BROYDN3D: residuals `r_i = (3 − 2x_i) x_i − x_{i−1} − 2 x_{i+1} + 1` with
/// `x_{−1} = x_n = 0`; start all `−1`.
#[derive(Debug, Clone)]
pub struct Broyden3d {
    pub n: usize,
}

impl TestFunction for Broyden3d {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.residuals(x).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let r = self.residuals(x);
        self.jac_t_vec(x, &r) * 2.0
    }

    fn hess_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        // 2 JᵀJ v + 2 Σ r_i ∇²r_i v, with ∇²r_i = −4 e_i e_iᵀ.
        let r = self.residuals(x);
        let jv = self.jac_vec(x, v);
        let mut out = self.jac_t_vec(x, &jv) * 2.0;
        for i in 0..self.n {
            out[i] -= 8.0 * r[i] * v[i];
        }
        out
    }

    fn least_squares(&self) -> Option<&dyn LeastSquares> {
        Some(self)
    }
}

impl LeastSquares for Broyden3d {
    fn n_residuals(&self) -> usize {
        self.n
    }

    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |i, _| {
            let prev = if i > 0 { x[i - 1] } else { 0.0 };
            let next = if i + 1 < n { x[i + 1] } else { 0.0 };
            (3.0 - 2.0 * x[i]) * x[i] - prev - 2.0 * next + 1.0
        })
    }

    fn jac_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |i, _| {
            let prev = if i > 0 { v[i - 1] } else { 0.0 };
            let next = if i + 1 < n { v[i + 1] } else { 0.0 };
            (3.0 - 4.0 * x[i]) * v[i] - prev - 2.0 * next
        })
    }

    fn jac_t_vec(&self, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |j, _| {
            // column j of J: row j (diagonal), row j+1 (−1), row j−1 (−2)
            let mut acc = (3.0 - 4.0 * x[j]) * w[j];
            if j + 1 < n {
                acc -= w[j + 1];
            }
            if j > 0 {
                acc -= 2.0 * w[j - 1];
            }
            acc
        })
    }
}

/// TRIDIA, a convex quadratic:
/// `f(x) = (x_0 − 1)² + Σ_{i≥1} (i+1) (2 x_i − x_{i−1})²`, start all ones.
#[derive(Debug, Clone)]
pub struct Tridia {
    pub n: usize,
}

impl Tridia {
    const ALPHA: f64 = 2.0;
    const BETA: f64 = 1.0;
    const GAMMA: f64 = 1.0;
    const DELTA: f64 = 1.0;

    fn weight(i: usize) -> f64 {
        if i == 0 {
            Self::GAMMA.sqrt()
        } else {
            ((i + 1) as f64).sqrt()
        }
    }
}

impl TestFunction for Tridia {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.residuals(x).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let r = self.residuals(x);
        self.jac_t_vec(x, &r) * 2.0
    }

    fn hess_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let jv = self.jac_vec(x, v);
        self.jac_t_vec(x, &jv) * 2.0
    }

    fn least_squares(&self) -> Option<&dyn LeastSquares> {
        Some(self)
    }
}

impl LeastSquares for Tridia {
    fn n_residuals(&self) -> usize {
        self.n
    }

    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut r = self.jac_vec(x, x);
        r[0] -= Self::weight(0);
        r
    }

    fn jac_vec(&self, _x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| {
            if i == 0 {
                Self::weight(0) * Self::DELTA * v[0]
            } else {
                Self::weight(i) * (Self::ALPHA * v[i] - Self::BETA * v[i - 1])
            }
        })
    }

    fn jac_t_vec(&self, _x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |j, _| {
            let mut acc = if j == 0 {
                Self::weight(0) * Self::DELTA * w[0]
            } else {
                Self::weight(j) * Self::ALPHA * w[j]
            };
            if j + 1 < n {
                acc -= Self::weight(j + 1) * Self::BETA * w[j + 1];
            }
            acc
        })
    }
}

/// EG2: `f(x) = Σ_{i<n-1} sin(x_0 + x_i² − 1) + ½ sin(x_{n−1}²)`, start at the origin.
#[derive(Debug, Clone)]
pub struct Eg2 {
    pub n: usize,
}

impl TestFunction for Eg2 {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let last = x[self.n - 1];
        (0..self.n - 1)
            .map(|i| (x[0] + x[i] * x[i] - 1.0).sin())
            .sum::<f64>()
            + 0.5 * (last * last).sin()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut g = DVector::zeros(n);
        for i in 0..n - 1 {
            let c = (x[0] + x[i] * x[i] - 1.0).cos();
            g[0] += c;
            g[i] += 2.0 * x[i] * c;
        }
        let last = x[n - 1];
        g[n - 1] += last * (last * last).cos();
        g
    }

    fn hess_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut out = DVector::zeros(n);
        for i in 0..n - 1 {
            let t = x[0] + x[i] * x[i] - 1.0;
            let (s, c) = t.sin_cos();
            if i == 0 {
                let d = 1.0 + 2.0 * x[0];
                out[0] += (-d * d * s + 2.0 * c) * v[0];
            } else {
                let h00 = -s;
                let h0i = -2.0 * x[i] * s;
                let hii = 2.0 * c - 4.0 * x[i] * x[i] * s;
                out[0] += h00 * v[0] + h0i * v[i];
                out[i] += h0i * v[0] + hii * v[i];
            }
        }
        let last = x[n - 1];
        let (s, c) = (last * last).sin_cos();
        out[n - 1] += (c - 2.0 * last * last * s) * v[n - 1];
        out
    }
}

/// DIXMAANA (`n = 3m`):
/// `f(x) = 1 + Σ x_i² + Σ_{i<2m} ⅛ x_i² x_{i+m}⁴ + Σ_{i<m} ⅛ x_i x_{i+2m}`,
/// start all `2`.
#[derive(Debug, Clone)]
pub struct Dixmaana {
    pub n: usize,
}

impl Dixmaana {
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 0.125;
    const DELTA: f64 = 0.125;
}

impl TestFunction for Dixmaana {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let m = self.n / 3;
        let mut f = 1.0 + Self::ALPHA * x.norm_squared();
        for i in 0..2 * m {
            f += Self::GAMMA * x[i] * x[i] * x[i + m].powi(4);
        }
        for i in 0..m {
            f += Self::DELTA * x[i] * x[i + 2 * m];
        }
        f
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let m = self.n / 3;
        let mut g = x * (2.0 * Self::ALPHA);
        for i in 0..2 * m {
            let j = i + m;
            g[i] += 2.0 * Self::GAMMA * x[i] * x[j].powi(4);
            g[j] += 4.0 * Self::GAMMA * x[i] * x[i] * x[j].powi(3);
        }
        for i in 0..m {
            g[i] += Self::DELTA * x[i + 2 * m];
            g[i + 2 * m] += Self::DELTA * x[i];
        }
        g
    }

    fn hess_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let m = self.n / 3;
        let mut out = v * (2.0 * Self::ALPHA);
        for i in 0..2 * m {
            let j = i + m;
            let hii = 2.0 * Self::GAMMA * x[j].powi(4);
            let hij = 8.0 * Self::GAMMA * x[i] * x[j].powi(3);
            let hjj = 12.0 * Self::GAMMA * x[i] * x[i] * x[j] * x[j];
            out[i] += hii * v[i] + hij * v[j];
            out[j] += hij * v[i] + hjj * v[j];
        }
        for i in 0..m {
            out[i] += Self::DELTA * v[i + 2 * m];
            out[i + 2 * m] += Self::DELTA * v[i];
        }
        out
    }
}

/// HELIX (Fletcher-Powell helical valley), three variables:
/// `f(x) = 100 [(x_3 − 10θ)² + (r − 1)²] + x_3²` with `r = ‖(x_1, x_2)‖` and
/// `2πθ = atan(x_2/x_1)` (plus `π` when `x_1 < 0`). Start `(−1, 0, 0)`.
#[derive(Debug, Clone, Default)]
pub struct Helix;

impl Helix {
    fn theta(x1: f64, x2: f64) -> f64 {
        if x1 > 0.0 {
            (x2 / x1).atan() / (2.0 * PI)
        } else if x1 < 0.0 {
            (x2 / x1).atan() / (2.0 * PI) + 0.5
        } else {
            0.25f64.copysign(x2)
        }
    }
}

impl TestFunction for Helix {
    fn dim(&self) -> usize {
        3
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.residuals(x).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let r = self.residuals(x);
        self.jac_t_vec(x, &r) * 2.0
    }

    fn hess_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let res = self.residuals(x);
        let jv = self.jac_vec(x, v);
        let mut out = self.jac_t_vec(x, &jv) * 2.0;

        let (x1, x2) = (x[0], x[1]);
        let rho2 = x1 * x1 + x2 * x2;
        let rho = rho2.sqrt();
        let c = 1.0 / (2.0 * PI * rho2 * rho2);
        // second derivatives of θ and of ρ in the (x1, x2) block
        let t11 = 2.0 * x1 * x2 * c;
        let t22 = -t11;
        let t12 = (x2 * x2 - x1 * x1) * c;
        let rho3 = rho2 * rho;
        let q11 = x2 * x2 / rho3;
        let q22 = x1 * x1 / rho3;
        let q12 = -x1 * x2 / rho3;
        // r1 = 10 x3 − 100 θ, r2 = 10 ρ − 10
        let a11 = -100.0 * res[0] * t11 + 10.0 * res[1] * q11;
        let a22 = -100.0 * res[0] * t22 + 10.0 * res[1] * q22;
        let a12 = -100.0 * res[0] * t12 + 10.0 * res[1] * q12;
        out[0] += 2.0 * (a11 * v[0] + a12 * v[1]);
        out[1] += 2.0 * (a12 * v[0] + a22 * v[1]);
        out
    }

    fn least_squares(&self) -> Option<&dyn LeastSquares> {
        Some(self)
    }
}

impl Helix {
    fn jacobian(x: &DVector<f64>) -> [[f64; 3]; 3] {
        let (x1, x2) = (x[0], x[1]);
        let rho2 = x1 * x1 + x2 * x2;
        let rho = rho2.sqrt();
        let th1 = -x2 / (2.0 * PI * rho2);
        let th2 = x1 / (2.0 * PI * rho2);
        [
            [-100.0 * th1, -100.0 * th2, 10.0],
            [10.0 * x1 / rho, 10.0 * x2 / rho, 0.0],
            [0.0, 0.0, 1.0],
        ]
    }
}

impl LeastSquares for Helix {
    fn n_residuals(&self) -> usize {
        3
    }

    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        DVector::from_vec(vec![
            10.0 * (x[2] - 10.0 * Self::theta(x[0], x[1])),
            10.0 * (rho - 1.0),
            x[2],
        ])
    }

    fn jac_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let j = Self::jacobian(x);
        DVector::from_fn(3, |i, _| j[i][0] * v[0] + j[i][1] * v[1] + j[i][2] * v[2])
    }

    fn jac_t_vec(&self, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let j = Self::jacobian(x);
        DVector::from_fn(3, |k, _| j[0][k] * w[0] + j[1][k] * w[1] + j[2][k] * w[2])
    }
}

/// KOWOSB (Kowalik-Osborne), four variables, eleven residuals
/// `r_i = y_i − x_1 (u_i² + u_i x_2) / (u_i² + u_i x_3 + x_4)`.
#[derive(Debug, Clone, Default)]
pub struct Kowosb;

impl Kowosb {
    const Y: [f64; 11] = [
        0.1957, 0.1947, 0.1735, 0.1600, 0.0844, 0.0627, 0.0456, 0.0342, 0.0323, 0.0235, 0.0246,
    ];
    const U: [f64; 11] = [
        4.0, 2.0, 1.0, 0.5, 0.25, 0.167, 0.125, 0.1, 0.0833, 0.0714, 0.0625,
    ];

    pub fn start() -> DVector<f64> {
        DVector::from_vec(vec![0.25, 0.39, 0.415, 0.39])
    }

    /// Gradient of the model term `x_1 a/d` for data point `i`.
    fn model_grad(x: &DVector<f64>, i: usize) -> [f64; 4] {
        let u = Self::U[i];
        let a = u * u + u * x[1];
        let d = u * u + u * x[2] + x[3];
        let d2 = d * d;
        [a / d, x[0] * u / d, -x[0] * a * u / d2, -x[0] * a / d2]
    }
}

impl TestFunction for Kowosb {
    fn dim(&self) -> usize {
        4
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.residuals(x).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let r = self.residuals(x);
        self.jac_t_vec(x, &r) * 2.0
    }

    fn hess_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let r = self.residuals(x);
        let jv = self.jac_vec(x, v);
        let mut out = self.jac_t_vec(x, &jv) * 2.0;
        // second-order part: −2 Σ r_i ∇²m_i v
        for i in 0..11 {
            let u = Self::U[i];
            let a = u * u + u * x[1];
            let d = u * u + u * x[2] + x[3];
            let (d2, d3) = (d * d, d * d * d);
            let mut h = [[0.0; 4]; 4];
            h[0][1] = u / d;
            h[0][2] = -a * u / d2;
            h[0][3] = -a / d2;
            h[1][2] = -x[0] * u * u / d2;
            h[1][3] = -x[0] * u / d2;
            h[2][2] = 2.0 * x[0] * a * u * u / d3;
            h[2][3] = 2.0 * x[0] * a * u / d3;
            h[3][3] = 2.0 * x[0] * a / d3;
            for p in 0..4 {
                for q in 0..p {
                    h[p][q] = h[q][p];
                }
            }
            for p in 0..4 {
                let hv: f64 = (0..4).map(|q| h[p][q] * v[q]).sum();
                out[p] -= 2.0 * r[i] * hv;
            }
        }
        out
    }

    fn least_squares(&self) -> Option<&dyn LeastSquares> {
        Some(self)
    }
}

impl LeastSquares for Kowosb {
    fn n_residuals(&self) -> usize {
        11
    }

    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(11, |i, _| {
            let u = Self::U[i];
            Self::Y[i] - x[0] * (u * u + u * x[1]) / (u * u + u * x[2] + x[3])
        })
    }

    fn jac_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(11, |i, _| {
            let dm = Self::model_grad(x, i);
            -(0..4).map(|k| dm[k] * v[k]).sum::<f64>()
        })
    }

    fn jac_t_vec(&self, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(4);
        for i in 0..11 {
            let dm = Self::model_grad(x, i);
            for k in 0..4 {
                out[k] -= dm[k] * w[i];
            }
        }
        out
    }
}

/// ARGLINA, a linear least-squares problem with `m ≥ n` residuals
/// `r_i = x_i − (2/m) Σ x_j − 1` (`i < n`) and `r_i = −(2/m) Σ x_j − 1`
/// (`i ≥ n`); start all ones.
#[derive(Debug, Clone)]
pub struct Arglina {
    pub n: usize,
    pub m: usize,
}

impl TestFunction for Arglina {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.residuals(x).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let r = self.residuals(x);
        self.jac_t_vec(x, &r) * 2.0
    }

    fn hess_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let jv = self.jac_vec(x, v);
        self.jac_t_vec(x, &jv) * 2.0
    }

    fn least_squares(&self) -> Option<&dyn LeastSquares> {
        Some(self)
    }
}

impl LeastSquares for Arglina {
    fn n_residuals(&self) -> usize {
        self.m
    }

    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut r = self.jac_vec(x, x);
        r.add_scalar_mut(-1.0);
        r
    }

    fn jac_vec(&self, _x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let c = 2.0 / self.m as f64 * v.sum();
        DVector::from_fn(self.m, |i, _| if i < self.n { v[i] - c } else { -c })
    }

    fn jac_t_vec(&self, _x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let c = 2.0 / self.m as f64 * w.sum();
        DVector::from_fn(self.n, |j, _| w[j] - c)
    }
}

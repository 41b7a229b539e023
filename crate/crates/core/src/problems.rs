//! Registry of linear transport benchmarks on the unit box.

use std::f64::consts::PI;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::operator::{ConstantVelocity, FluxKind, VelocityField};

pub type InitialFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type ExactFn = Box<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// What is known about the exact solution.
pub enum Exact {
    None,
    /// Exact solution at every time.
    Always(ExactFn),
    /// The solution returns to the initial state at this time.
    InitialAt(f64),
}

pub struct TransportProblem {
    pub name: String,
    pub domain: Domain,
    pub default_flux: FluxKind,
    pub field: Box<dyn VelocityField + Send>,
    pub initial: InitialFn,
    pub exact: Exact,
}

impl TransportProblem {
    /// Exact value at `(t, x)` when known.
    pub fn exact_value(&self, t: f64, x: &[f64]) -> Option<f64> {
        match &self.exact {
            Exact::None => None,
            Exact::Always(f) => Some(f(t, x)),
            Exact::InitialAt(s) if (t - s).abs() <= 1e-12 * s.abs().max(1.0) => Some((self.initial)(x)),
            Exact::InitialAt(_) => None,
        }
    }

    pub fn has_exact(&self, t: f64) -> bool {
        match &self.exact {
            Exact::None => false,
            Exact::Always(_) => true,
            Exact::InitialAt(s) => (t - s).abs() <= 1e-12 * s.abs().max(1.0),
        }
    }
}

pub const TRANSPORT_PROBLEMS: &[&str] = &[
    "linear_smooth",
    "linear_discontinuous",
    "rotation_bell",
    "rotation_discontinuous",
    "deformational_bell",
    "deformational_discontinuous",
];

/// Half-width of the box in the discontinuous linear advection data.
pub const LINEAR_BOX_HALF: f64 = 0.244_948_974_278_317_8; // sqrt(6) / 10

/// Half-width of the box in the discontinuous rotation / deformation data.
pub const ROTATION_BOX_HALF: f64 = std::f64::consts::SQRT_2 / 10.0;

/// Period of the deformational flow.
pub const DEFORMATION_PERIOD: f64 = 1.5;

/// `a = (-x2 + 1/2, x1 - 1/2)`.
#[derive(Debug, Clone, Copy)]
pub struct RotationField;

impl VelocityField for RotationField {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = 0.5 - x[1];
        out[1] = x[0] - 0.5;
    }

    fn speed_bounds(&self, _t: f64) -> Vec<f64> {
        vec![0.5, 0.5]
    }
}

/// Swirling flow that reverses at half period and restores the data at
/// `t = period`.
#[derive(Debug, Clone, Copy)]
pub struct DeformationalField {
    pub period: f64,
}

impl VelocityField for DeformationalField {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let g = (PI * t / self.period).cos();
        out[0] = (PI * x[0]).sin().powi(2) * (2.0 * PI * x[1]).sin() * g;
        out[1] = -(PI * x[1]).sin().powi(2) * (2.0 * PI * x[0]).sin() * g;
    }

    fn speed_bounds(&self, _t: f64) -> Vec<f64> {
        vec![1.0, 1.0]
    }
}

/// `b^{d-1} cos^6(pi r / 2b)` inside radius `b` around `center`.
pub fn cosine_bell(x: &[f64], center: &[f64], b: f64) -> f64 {
    let r = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
    if r <= b {
        b.powi(center.len() as i32 - 1) * (PI * r / (2.0 * b)).cos().powi(6)
    } else {
        0.0
    }
}

fn in_box(x: &[f64], center: &[f64], half: f64) -> f64 {
    if x.iter().zip(center).all(|(a, c)| (a - c).abs() <= half) {
        1.0
    } else {
        0.0
    }
}

fn wrap(x: f64) -> f64 {
    x - x.floor()
}

fn need_dim(name: &str, d: usize, want: usize) -> Result<()> {
    if d != want {
        return Err(Error::Config(format!("problem `{name}` is defined for d = {want}, got d = {d}")));
    }
    Ok(())
}

/// Rotate `x` by `-t` about `(1/2, 1/2)`: the foot of the characteristic.
fn rotate_back(t: f64, x: &[f64]) -> [f64; 2] {
    let (s, c) = t.sin_cos();
    let (dx, dy) = (x[0] - 0.5, x[1] - 0.5);
    [0.5 + c * dx + s * dy, 0.5 - s * dx + c * dy]
}

/// Look up a transport benchmark by name.
pub fn transport_problem(name: &str, d: usize) -> Result<TransportProblem> {
    if d == 0 {
        return Err(Error::Config("dimension must be positive".into()));
    }
    let domain = Domain::unit_periodic(d);
    let p = match name {
        "linear_smooth" | "linear_discontinuous" => {
            let smooth = name == "linear_smooth";
            let ic = move |x: &[f64]| -> f64 {
                if smooth {
                    x.iter().map(|v| (PI * v).sin().powi(4)).product()
                } else {
                    in_box(x, &vec![0.5; x.len()], LINEAR_BOX_HALF)
                }
            };
            let exact = move |t: f64, x: &[f64]| {
                let y: Vec<f64> = x.iter().map(|v| wrap(v - t)).collect();
                ic(&y)
            };
            TransportProblem {
                name: name.into(),
                domain,
                default_flux: FluxKind::Upwind,
                field: Box::new(ConstantVelocity(vec![1.0; d])),
                initial: Box::new(ic),
                exact: Exact::Always(Box::new(exact)),
            }
        }
        "rotation_bell" | "rotation_discontinuous" => {
            need_dim(name, d, 2)?;
            let bell = name == "rotation_bell";
            let ic = move |x: &[f64]| {
                if bell {
                    cosine_bell(x, &[0.75, 0.5], 0.23)
                } else {
                    in_box(x, &[0.75, 0.5], ROTATION_BOX_HALF)
                }
            };
            let exact = move |t: f64, x: &[f64]| ic(&rotate_back(t, x));
            TransportProblem {
                name: name.into(),
                domain,
                default_flux: FluxKind::LaxFriedrichs,
                field: Box::new(RotationField),
                initial: Box::new(ic),
                exact: Exact::Always(Box::new(exact)),
            }
        }
        "deformational_bell" | "deformational_discontinuous" => {
            need_dim(name, d, 2)?;
            let bell = name == "deformational_bell";
            let ic = move |x: &[f64]| {
                if bell {
                    cosine_bell(x, &[0.65, 0.5], 0.35)
                } else {
                    in_box(x, &[0.75, 0.5], ROTATION_BOX_HALF)
                }
            };
            TransportProblem {
                name: name.into(),
                domain,
                default_flux: FluxKind::LaxFriedrichs,
                field: Box::new(DeformationalField { period: DEFORMATION_PERIOD }),
                initial: Box::new(ic),
                exact: Exact::InitialAt(DEFORMATION_PERIOD),
            }
        }
        _ => return Err(Error::UnknownProblem(name.into())),
    };
    Ok(p)
}

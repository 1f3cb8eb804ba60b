//! Serializable report records. Field order is fixed by the struct layout and
//! maps are ordered, so a report serializes to the same bytes for the same
//! scenario and seed.

use bslice_core::expr::{CoordinateMap, Rational};
use bslice_core::linalg::Mat;
use serde::Serialize;

pub const SCHEMA: u32 = 1;
pub const TOOLKIT: &str = "bslice";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    /// Some declared structure failed validation.
    Fail,
    /// A Moser residual exceeded its threshold.
    CertificationFail,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Fail => 2,
            Status::CertificationFail => 3,
        }
    }

    /// Validation failures take precedence over certification failures.
    pub fn combine(self, other: Status) -> Status {
        match (self, other) {
            (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
            (Status::CertificationFail, _) | (_, Status::CertificationFail) => Status::CertificationFail,
            _ => Status::Pass,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    pub toolkit: &'static str,
    pub version: &'static str,
    pub scenario: String,
    pub seed: u64,
    pub command: String,
    pub status: Status,
    pub tasks: Vec<TaskRecord>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum TaskRecord {
    Check(CheckRecord),
    Invariants(InvariantsRecord),
    Cover(CoverRecord),
    NormalForm(NormalFormRecord),
    Moser(MoserRecord),
}

impl TaskRecord {
    pub fn status(&self) -> Status {
        let ok = |b: bool| if b { Status::Pass } else { Status::Fail };
        match self {
            TaskRecord::Check(r) => ok(r.passed),
            TaskRecord::Invariants(_) => Status::Pass,
            TaskRecord::Cover(r) => ok(r.roundtrip),
            TaskRecord::NormalForm(r) => r
                .orbits
                .iter()
                .filter_map(|o| o.certification.as_ref())
                .fold(Status::Pass, |s, c| s.combine(c.status())),
            TaskRecord::Moser(r) => {
                let mut s = r.certification.status();
                if r.equivariance_defect.is_some_and(|d| d > r.equivariance_tolerance) {
                    s = s.combine(Status::CertificationFail);
                }
                s
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessRecord {
    pub point: Vec<f64>,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct FormCheck {
    pub name: String,
    pub closed: bool,
    pub nondegenerate: bool,
    pub min_abs_det: f64,
    pub pfaffian: Option<String>,
    pub witness: Option<WitnessRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CollarCheck {
    pub form: String,
    /// Signed coefficient of `dt ∧ da/a` on `Z`.
    pub c: String,
    pub modular_period: String,
    pub monodromy_order: u32,
    pub samples: usize,
    pub alpha_error: f64,
    pub beta_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceFailureRecord {
    /// Group element in the action's parameter coordinates.
    pub element: Vec<f64>,
    pub label: String,
    pub point: Vec<f64>,
    pub max_diff: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransversalityRecord {
    pub transverse: bool,
    pub circle_param: Option<usize>,
    pub declared_degree: i64,
    pub measured_degree: i64,
    pub min_abs_alpha: f64,
    pub witness: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ActionCheck {
    pub name: String,
    pub group: String,
    pub axioms: bool,
    pub axiom_witness: Option<String>,
    /// Forms the invariance check ran against.
    pub invariance_forms: Vec<String>,
    pub invariant: bool,
    pub invariance_failures: Vec<InvarianceFailureRecord>,
    pub transversality: Option<TransversalityRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub forms: Vec<FormCheck>,
    pub collar: Option<CollarCheck>,
    pub actions: Vec<ActionCheck>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionRecord {
    pub h: String,
    pub case: String,
    pub circle_param: usize,
    pub h_prime: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IsotropyRecord {
    pub anchor: String,
    pub point: Vec<f64>,
    pub l: u32,
    pub h_z: String,
    pub h_z_dim: usize,
    pub m_dim: usize,
    pub v_dim: usize,
    pub m0: u32,
    pub sigma_v: Vec<Vec<f64>>,
    pub orbit_scale: Option<f64>,
    /// `|c|·k/l`.
    pub model_period: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantsRecord {
    pub c: String,
    pub modular_period: String,
    pub k: u32,
    pub degree: i64,
    pub c_prime: String,
    pub decomposition: DecompositionRecord,
    pub isotropy: Vec<IsotropyRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MapRecord {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub components: Vec<String>,
}

impl MapRecord {
    pub fn of(map: &CoordinateMap) -> Self {
        let names = |c: &bslice_core::expr::Chart| (0..c.dim()).map(|i| c.name(i).to_string()).collect();
        MapRecord {
            source: names(map.source()),
            target: names(map.target()),
            components: map.components().iter().map(|e| e.named(&**map.source()).to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverRecord {
    pub k: u32,
    pub degree: i64,
    pub circle_param: usize,
    pub deck_generator: MapRecord,
    pub sigma_1: MapRecord,
    pub lifted_form: Vec<String>,
    pub lifted_modular_period: String,
    /// `k·|c|`.
    pub expected_period: String,
    /// `quotient(lift(ω)) ≡ ω`.
    pub roundtrip: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificationRecord {
    pub anchor_mismatch: f64,
    pub g: String,
    pub radius: f64,
    pub steps: usize,
    pub samples: usize,
    pub residual: f64,
    pub max_solve_residual: f64,
    pub anchor_displacement: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CertificationRecord {
    pub fn status(&self) -> Status {
        if self.passed {
            Status::Pass
        } else {
            Status::CertificationFail
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelRecord {
    pub c: String,
    pub k: u32,
    pub l: u32,
    pub c_prime: String,
    pub model_period: String,
    pub quotient_period: String,
    pub variant: String,
    pub h: String,
    pub h_z: String,
    pub m_dim: usize,
    pub v_dim: usize,
    pub orbit_scale: String,
    pub chart: Vec<String>,
    pub omega_tilde0: Vec<String>,
    pub deck_generator: MapRecord,
    pub sigma: Vec<Vec<f64>>,
    pub h_shift: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitRecord {
    pub anchor: String,
    pub point: Vec<f64>,
    pub model: ModelRecord,
    pub identification: MapRecord,
    pub lifted_form: Vec<String>,
    pub model_pullback: Vec<String>,
    pub certification: Option<CertificationRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormalFormRecord {
    pub orbits: Vec<OrbitRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MoserRecord {
    pub omega0: String,
    pub omega1: String,
    pub anchor: String,
    pub orbit_coords: Vec<String>,
    pub symmetry: Option<String>,
    pub certification: CertificationRecord,
    pub equivariance_defect: Option<f64>,
    pub equivariance_tolerance: f64,
}

pub fn rational(q: Rational) -> String {
    q.to_string()
}

pub fn rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows).map(|i| (0..m.cols).map(|j| m[(i, j)]).collect()).collect()
}

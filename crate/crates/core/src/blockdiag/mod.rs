//! Block-diagonal geodesics in reduced form.
//!
//! `beta`, `omega` are direct sums of 2x2 blocks `b0 I + b1 K + b2 S` and
//! `w0 I + w1 K + w2 S`, and `zeta` of blocks `z Z`, with a trailing 1x1
//! entry when `n` is odd. The flow closes on the coefficient vectors.

mod instability;
mod planar;
mod pulse;
mod swirl;

pub use instability::{instability_demo, InstabilityReport, RunSummary};
pub use planar::{
    integrate_planar, section_crossings, Hamiltonian2DState, PlanarTrajectory, SectionCrossing,
};
pub use pulse::{PeriodReport, PulseSystem};
pub use swirl::{fit_line, ShearReport, SwirlAsymptotics, SwirlSystem};

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::geometry::sff_reduced;
use crate::integrate::{FlowState, InvariantReport, ReducedState};
use crate::linalg::{k2, s2, z2, SquareMatrix};

/// Tolerance for `det(beta) = 1` and the compatibility condition.
pub const BLOCK_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// The trailing 1x1 entries of `beta` and `omega` in odd dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OddTail {
    pub b_inf: f64,
    pub w_inf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBlock", into = "RawBlock")]
pub struct BlockState {
    pub b0: Vec<f64>,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub w0: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub z: Vec<f64>,
    pub tail: Option<OddTail>,
}

#[derive(Serialize, Deserialize)]
struct RawBlock {
    b0: Vec<f64>,
    #[serde(default)]
    b1: Vec<f64>,
    #[serde(default)]
    b2: Vec<f64>,
    w0: Vec<f64>,
    #[serde(default)]
    w1: Vec<f64>,
    #[serde(default)]
    w2: Vec<f64>,
    z: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b_inf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w_inf: Option<f64>,
}

impl TryFrom<RawBlock> for BlockState {
    type Error = GeoError;

    fn try_from(r: RawBlock) -> Result<Self> {
        let m = r.b0.len();
        let fill = |v: Vec<f64>| if v.is_empty() { vec![0.0; m] } else { v };
        let tail = match (r.b_inf, r.w_inf) {
            (None, None) => None,
            (Some(b_inf), w) => Some(OddTail {
                b_inf,
                w_inf: w.unwrap_or(0.0),
            }),
            (None, Some(_)) => {
                return Err(GeoError::InvalidState("w_inf given without b_inf".into()))
            }
        };
        BlockState::new(
            r.b0,
            fill(r.b1),
            fill(r.b2),
            r.w0,
            fill(r.w1),
            fill(r.w2),
            r.z,
            tail,
        )
    }
}

impl From<BlockState> for RawBlock {
    fn from(s: BlockState) -> Self {
        RawBlock {
            b0: s.b0,
            b1: s.b1,
            b2: s.b2,
            w0: s.w0,
            w1: s.w1,
            w2: s.w2,
            z: s.z,
            b_inf: s.tail.map(|t| t.b_inf),
            w_inf: s.tail.map(|t| t.w_inf),
        }
    }
}

/// Coefficients `(c0, c1, c2)` of `c0 I + c1 K + c2 S`.
type Sym2 = [f64; 3];

/// `beta omega beta` for one block.
fn bwb(b: Sym2, w: Sym2) -> Sym2 {
    let [b0, b1, b2] = b;
    let [w0, w1, w2] = w;
    [
        w0 * (b0 * b0 + b1 * b1 + b2 * b2) + 2.0 * w1 * b1 * b0 + 2.0 * w2 * b2 * b0,
        2.0 * w0 * b1 * b0 + w1 * (b0 * b0 + b1 * b1 - b2 * b2) + 2.0 * w2 * b2 * b1,
        2.0 * w0 * b0 * b2 + w2 * (b0 * b0 - b1 * b1 + b2 * b2) + 2.0 * w1 * b1 * b2,
    ]
}

/// `zeta^T beta omega + omega beta zeta` for one block.
fn cross(b: Sym2, w: Sym2, z: f64) -> Sym2 {
    let [b0, b1, b2] = b;
    let [w0, w1, w2] = w;
    [
        2.0 * z * (w1 * b2 - w2 * b1),
        2.0 * z * (w0 * b2 + w2 * b0),
        2.0 * z * (-w0 * b1 - w1 * b0),
    ]
}

/// `tr(omega beta omega beta)` for one block.
fn tr_wbwb(b: Sym2, w: Sym2) -> f64 {
    let dot = b[0] * w[0] + b[1] * w[1] + b[2] * w[2];
    4.0 * dot * dot
        + 2.0 * (w[1] * w[1] + w[2] * w[2] - w[0] * w[0]) * (b[0] * b[0] - b[1] * b[1] - b[2] * b[2])
}

/// `tr(beta zeta beta zeta)` for one block.
fn tr_bzbz(b: Sym2, z: f64) -> f64 {
    2.0 * z * z * (b[1] * b[1] + b[2] * b[2] - b[0] * b[0])
}

fn sym_block(c: Sym2) -> SquareMatrix {
    SquareMatrix::identity(2).scale(c[0]) + k2().scale(c[1]) + s2().scale(c[2])
}

impl BlockState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        b0: Vec<f64>,
        b1: Vec<f64>,
        b2: Vec<f64>,
        w0: Vec<f64>,
        w1: Vec<f64>,
        w2: Vec<f64>,
        z: Vec<f64>,
        tail: Option<OddTail>,
    ) -> Result<Self> {
        let s = BlockState {
            b0,
            b1,
            b2,
            w0,
            w1,
            w2,
            z,
            tail,
        };
        s.check()?;
        Ok(s)
    }

    /// State with `b1 = b2 = w1 = w2 = 0`.
    pub fn pure_diagonal(b0: Vec<f64>, w0: Vec<f64>, z: Vec<f64>, tail: Option<OddTail>) -> Result<Self> {
        let m = b0.len();
        Self::new(b0, vec![0.0; m], vec![0.0; m], w0, vec![0.0; m], vec![0.0; m], z, tail)
    }

    fn check(&self) -> Result<()> {
        let m = self.b0.len();
        if m == 0 {
            return Err(GeoError::InvalidState("at least one 2x2 block is required".into()));
        }
        for (name, v) in [
            ("b1", &self.b1),
            ("b2", &self.b2),
            ("w0", &self.w0),
            ("w1", &self.w1),
            ("w2", &self.w2),
            ("z", &self.z),
        ] {
            if v.len() != m {
                return Err(GeoError::InvalidState(format!(
                    "{name} has length {}, expected {m}",
                    v.len()
                )));
            }
        }
        if !self.pack().iter().all(|v| v.is_finite()) {
            return Err(GeoError::InvalidState("non-finite block coefficient".into()));
        }
        for i in 0..m {
            if !(self.b0[i] > self.b1[i].hypot(self.b2[i])) {
                return Err(GeoError::InvalidState(format!(
                    "block {} of beta is not positive definite",
                    i + 1
                )));
            }
        }
        if let Some(t) = self.tail {
            if !(t.b_inf > 0.0) {
                return Err(GeoError::InvalidState("b_inf must be positive".into()));
            }
        }
        let det = self.det_beta();
        if !((det - 1.0).abs() <= BLOCK_TOLERANCE) {
            return Err(GeoError::InvalidState(format!(
                "det(beta) = 1 violated: det = {det}"
            )));
        }
        let c = self.compatibility();
        if !(c.abs() <= BLOCK_TOLERANCE) {
            return Err(GeoError::InvalidState(format!(
                "compatibility b.w = 0 violated: {c}"
            )));
        }
        Ok(())
    }

    /// Number of 2x2 blocks.
    pub fn blocks(&self) -> usize {
        self.b0.len()
    }

    pub fn parity(&self) -> Parity {
        if self.tail.is_some() {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.blocks() + usize::from(self.tail.is_some())
    }

    fn b(&self, i: usize) -> Sym2 {
        [self.b0[i], self.b1[i], self.b2[i]]
    }

    fn w(&self, i: usize) -> Sym2 {
        [self.w0[i], self.w1[i], self.w2[i]]
    }

    pub fn det_beta(&self) -> f64 {
        let blocks: f64 = (0..self.blocks())
            .map(|i| self.b0[i] * self.b0[i] - self.b1[i] * self.b1[i] - self.b2[i] * self.b2[i])
            .product();
        blocks * self.tail.map_or(1.0, |t| t.b_inf)
    }

    /// `b.w` plus half the tail product; vanishes when `tr(beta omega) = 0`.
    pub fn compatibility(&self) -> f64 {
        let blocks: f64 = (0..self.blocks())
            .map(|i| self.b0[i] * self.w0[i] + self.b1[i] * self.w1[i] + self.b2[i] * self.w2[i])
            .sum();
        blocks + self.tail.map_or(0.0, |t| 0.5 * t.b_inf * t.w_inf)
    }

    /// `tr(beta^-1) = ||A||^2`.
    pub fn position_norm_sq(&self) -> f64 {
        let blocks: f64 = (0..self.blocks())
            .map(|i| {
                2.0 * self.b0[i]
                    / (self.b0[i] * self.b0[i] - self.b1[i] * self.b1[i] - self.b2[i] * self.b2[i])
            })
            .sum();
        blocks + self.tail.map_or(0.0, |t| 1.0 / t.b_inf)
    }

    /// Semi-axis lengths `b0_i^{-1/2}`.
    pub fn axes(&self) -> Vec<f64> {
        self.b0.iter().map(|b| 1.0 / b.sqrt()).collect()
    }

    /// Largest of `|b1|, |b2|, |w1|, |w2|`.
    pub fn off_diagonal_size(&self) -> f64 {
        self.b1
            .iter()
            .chain(&self.b2)
            .chain(&self.w1)
            .chain(&self.w2)
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_pure_diagonal(&self) -> bool {
        self.off_diagonal_size() == 0.0
    }

    /// Flat layout `[b0, b1, b2, w0, w1, w2, z, (b_inf, w_inf)]`.
    pub fn pack(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(7 * self.blocks() + 2);
        for v in [&self.b0, &self.b1, &self.b2, &self.w0, &self.w1, &self.w2, &self.z] {
            y.extend_from_slice(v);
        }
        if let Some(t) = self.tail {
            y.push(t.b_inf);
            y.push(t.w_inf);
        }
        y
    }

    fn from_packed(m: usize, odd: bool, y: &[f64]) -> Self {
        let part = |k: usize| y[k * m..(k + 1) * m].to_vec();
        BlockState {
            b0: part(0),
            b1: part(1),
            b2: part(2),
            w0: part(3),
            w1: part(4),
            w2: part(5),
            z: part(6),
            tail: odd.then(|| OddTail {
                b_inf: y[7 * m],
                w_inf: y[7 * m + 1],
            }),
        }
    }

    /// Assembles the full reduced state.
    pub fn embed(&self) -> ReducedState {
        let m = self.blocks();
        let mut beta = Vec::with_capacity(m + 1);
        let mut omega = Vec::with_capacity(m + 1);
        let mut zeta = Vec::with_capacity(m + 1);
        for i in 0..m {
            beta.push(sym_block(self.b(i)));
            omega.push(sym_block(self.w(i)));
            zeta.push(z2().scale(self.z[i]));
        }
        if let Some(t) = self.tail {
            beta.push(SquareMatrix::diag(&[t.b_inf]));
            omega.push(SquareMatrix::diag(&[t.w_inf]));
            zeta.push(SquareMatrix::zeros(1));
        }
        ReducedState::from_parts_unchecked(
            SquareMatrix::direct_sum(&beta),
            SquareMatrix::direct_sum(&omega),
            SquareMatrix::direct_sum(&zeta),
        )
    }

    /// Reads block coefficients back from a reduced state, rejecting entries
    /// outside the block pattern larger than `tol` times the largest entry.
    pub fn extract(state: &ReducedState, tol: f64) -> Result<Self> {
        let n = state.dim();
        let m = n / 2;
        let scale = [&state.beta, &state.omega, &state.zeta]
            .iter()
            .fold(1.0f64, |acc, x| acc.max(x.max_abs()));
        for (name, x) in [("beta", &state.beta), ("omega", &state.omega), ("zeta", &state.zeta)] {
            for i in 0..n {
                for j in 0..n {
                    if i / 2 != j / 2 && x.get(i, j).abs() > tol * scale {
                        return Err(GeoError::InvalidState(format!(
                            "{name} is not block diagonal: entry ({i}, {j}) = {}",
                            x.get(i, j)
                        )));
                    }
                }
            }
        }
        let sym = |x: &SquareMatrix, k: usize| -> Sym2 {
            let (p, q) = (2 * k, 2 * k + 1);
            [
                0.5 * (x.get(p, p) + x.get(q, q)),
                0.5 * (x.get(p, p) - x.get(q, q)),
                0.5 * (x.get(p, q) + x.get(q, p)),
            ]
        };
        let mut s = BlockState {
            b0: Vec::with_capacity(m),
            b1: Vec::with_capacity(m),
            b2: Vec::with_capacity(m),
            w0: Vec::with_capacity(m),
            w1: Vec::with_capacity(m),
            w2: Vec::with_capacity(m),
            z: Vec::with_capacity(m),
            tail: None,
        };
        for k in 0..m {
            let b = sym(&state.beta, k);
            let w = sym(&state.omega, k);
            s.b0.push(b[0]);
            s.b1.push(b[1]);
            s.b2.push(b[2]);
            s.w0.push(w[0]);
            s.w1.push(w[1]);
            s.w2.push(w[2]);
            s.z.push(0.5 * (state.zeta.get(2 * k + 1, 2 * k) - state.zeta.get(2 * k, 2 * k + 1)));
        }
        if n % 2 == 1 {
            s.tail = Some(OddTail {
                b_inf: state.beta.get(n - 1, n - 1),
                w_inf: state.omega.get(n - 1, n - 1),
            });
        }
        s.check()?;
        Ok(s)
    }

    /// Total conserved energy `1/2 tr((omega + zeta)^T beta (omega + zeta))`
    /// written in block coefficients.
    pub fn energy(&self) -> f64 {
        let blocks: f64 = (0..self.blocks())
            .map(|i| {
                let [b0, b1, b2] = self.b(i);
                let [w0, w1, w2] = self.w(i);
                let z = self.z[i];
                b0 * (w0 * w0 + w1 * w1 + w2 * w2 + z * z) + 2.0 * w0 * w1 * b1 - 2.0 * w2 * b1 * z
                    + 2.0 * w0 * w2 * b2
                    + 2.0 * w1 * b2 * z
            })
            .sum();
        blocks + self.tail.map_or(0.0, |t| 0.5 * t.b_inf * t.w_inf * t.w_inf)
    }

    /// `z_i^2 (b0_i - sqrt(b1_i^2 + b2_i^2))` per block; each is at most the energy.
    pub fn ceiling_terms(&self) -> Vec<f64> {
        (0..self.blocks())
            .map(|i| self.z[i] * self.z[i] * (self.b0[i] - self.b1[i].hypot(self.b2[i])))
            .collect()
    }

    /// Time derivative of every coefficient, in the packed layout.
    pub fn rhs(&self) -> BlockState {
        let m = self.blocks();
        let mut global = 0.0;
        let mut tr_beta = 0.0;
        for i in 0..m {
            global += tr_wbwb(self.b(i), self.w(i)) + tr_bzbz(self.b(i), self.z[i]);
            tr_beta += 2.0 * self.b0[i];
        }
        if let Some(t) = self.tail {
            global += (t.w_inf * t.b_inf).powi(2);
            tr_beta += t.b_inf;
        }
        let global = 0.5 * global / tr_beta;

        let mut d = BlockState {
            b0: vec![0.0; m],
            b1: vec![0.0; m],
            b2: vec![0.0; m],
            w0: vec![0.0; m],
            w1: vec![0.0; m],
            w2: vec![0.0; m],
            z: vec![0.0; m],
            tail: None,
        };
        for i in 0..m {
            let (b, w, z) = (self.b(i), self.w(i), self.z[i]);
            let db = bwb(b, w);
            let wbw = bwb(w, b);
            let zbz = [z * z * b[0], -z * z * b[1], -z * z * b[2]];
            let cr = cross(b, w, z);
            d.b0[i] = -db[0];
            d.b1[i] = -db[1];
            d.b2[i] = -db[2];
            d.w0[i] = 0.5 * (wbw[0] + zbz[0] + cr[0]) + global;
            d.w1[i] = 0.5 * (wbw[1] + zbz[1] + cr[1]);
            d.w2[i] = 0.5 * (wbw[2] + zbz[2] + cr[2]);
        }
        d.tail = self.tail.map(|t| OddTail {
            b_inf: -t.w_inf * t.b_inf * t.b_inf,
            w_inf: 0.5 * t.w_inf * t.w_inf * t.b_inf + global,
        });
        d
    }
}

/// Time derivative of a block state.
pub fn block_rhs(state: &BlockState) -> BlockState {
    state.rhs()
}

pub fn block_energy(state: &BlockState) -> f64 {
    state.energy()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Bounded,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub verdict: Verdict,
    pub energy: f64,
    /// `E / z_i^2`, the ceiling on `b0_i - sqrt(b1_i^2 + b2_i^2)`, for `z_i != 0`.
    pub ceilings: Vec<Option<f64>>,
    /// Zero-based indices of blocks with `z_i = 0`.
    pub growth_blocks: Vec<usize>,
}

pub fn boundedness_verdict(state: &BlockState) -> BoundednessReport {
    let energy = state.energy();
    let ceilings: Vec<Option<f64>> = state
        .z
        .iter()
        .map(|&z| (z != 0.0).then(|| energy / (z * z)))
        .collect();
    let growth_blocks: Vec<usize> = (0..state.blocks()).filter(|&i| state.z[i] == 0.0).collect();
    let bounded =
        state.parity() == Parity::Even && state.is_pure_diagonal() && growth_blocks.is_empty();
    BoundednessReport {
        verdict: if bounded {
            Verdict::Bounded
        } else {
            Verdict::Inconclusive
        },
        energy,
        ceilings,
        growth_blocks,
    }
}

/// The three pure-diagonal `n = 6` scenarios shown as figures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Fig1, Preset::Fig2, Preset::Fig3];

    pub fn from_id(id: u32) -> Option<Self> {
        match id {
            1 => Some(Preset::Fig1),
            2 => Some(Preset::Fig2),
            3 => Some(Preset::Fig3),
            _ => None,
        }
    }

    pub fn id(self) -> u32 {
        match self {
            Preset::Fig1 => 1,
            Preset::Fig2 => 2,
            Preset::Fig3 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
        }
    }

    /// Initial data. Captions give `z_i b0_i` and `w0_1 b0_1`; `w0_3` is fixed
    /// by compatibility and `b0_3` by `det(beta) = 1`.
    pub fn state(self) -> BlockState {
        let (b0, w0, zb): ([f64; 3], [f64; 3], [f64; 3]) = match self {
            Preset::Fig1 => {
                let b = 0.9f64.powi(-2);
                ([b, b, 0.9f64.powi(4)], [0.0; 3], [0.5, 0.5, 0.3])
            }
            Preset::Fig2 => ([1.0, 1.0, 1.0], [3.0, 0.0, -3.0], [1.0, 0.5, 0.1]),
            Preset::Fig3 => ([0.25, 4.0, 1.0], [4.0, 0.0, -1.0], [0.0, 0.5, 0.6]),
        };
        let z = (0..3).map(|i| zb[i] / b0[i]).collect();
        BlockState::pure_diagonal(b0.to_vec(), w0.to_vec(), z, None)
            .expect("preset data satisfies the block constraints")
    }

    /// Default plotting window.
    pub fn window(self) -> (f64, f64) {
        match self {
            Preset::Fig1 | Preset::Fig2 => (-20.0, 20.0),
            Preset::Fig3 => (-40.0, 40.0),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fig1" | "1" => Ok(Preset::Fig1),
            "fig2" | "2" => Ok(Preset::Fig2),
            "fig3" | "3" => Ok(Preset::Fig3),
            other => Err(GeoError::InvalidParameters(format!("unknown preset `{other}`"))),
        }
    }
}

impl FlowState for BlockState {
    fn pack(&self) -> Vec<f64> {
        BlockState::pack(self)
    }

    fn unpack(&self, y: &[f64]) -> Result<Self> {
        let s = Self::from_packed(self.blocks(), self.tail.is_some(), y);
        s.check()?;
        Ok(s)
    }

    fn derivative(&self, y: &[f64], dy: &mut [f64]) {
        let s = Self::from_packed(self.blocks(), self.tail.is_some(), y);
        dy.copy_from_slice(&s.rhs().pack());
    }

    fn project(&self, y: &mut [f64]) {
        let m = self.blocks();
        let odd = self.tail.is_some();
        let mut s = Self::from_packed(m, odd, y);
        let det = s.det_beta();
        if !(det > 0.0) || !det.is_finite() {
            return;
        }
        let c = det.powf(-1.0 / s.dim() as f64);
        for v in [&mut s.b0, &mut s.b1, &mut s.b2] {
            v.iter_mut().for_each(|x| *x *= c);
        }
        if let Some(t) = s.tail.as_mut() {
            t.b_inf *= c;
        }
        let tr_beta = 2.0 * s.b0.iter().sum::<f64>() + s.tail.map_or(0.0, |t| t.b_inf);
        let k = 2.0 * s.compatibility() / tr_beta;
        s.w0.iter_mut().for_each(|x| *x -= k);
        if let Some(t) = s.tail.as_mut() {
            t.w_inf -= k;
        }
        y.copy_from_slice(&s.pack());
    }

    fn report(&self, reference: &Self) -> InvariantReport {
        let r = self.embed();
        let zeta_drift = self
            .z
            .iter()
            .zip(&reference.z)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        InvariantReport {
            energy: r.energy(),
            det_drift: (self.det_beta() - 1.0).abs(),
            zeta_drift,
            angmom_drift: (r.angular_momentum_norm() - reference.embed().angular_momentum_norm())
                .abs(),
            sff: sff_reduced(&r),
            virial_residual: 0.0,
            trace_omega: r.omega.trace(),
            jacobi: None,
        }
    }

    fn virial_prediction(&self) -> f64 {
        self.embed().virial_prediction()
    }

    fn state_columns(&self) -> Vec<String> {
        let m = self.blocks();
        let mut c = Vec::with_capacity(7 * m + 2);
        for name in ["b0", "b1", "b2", "w0", "w1", "w2", "z"] {
            c.extend((1..=m).map(|i| format!("{name}_{i}")));
        }
        if self.tail.is_some() {
            c.push("b_inf".into());
            c.push("w_inf".into());
        }
        c
    }

    fn state_values(&self) -> Vec<f64> {
        BlockState::pack(self)
    }
}

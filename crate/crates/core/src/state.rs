//! Probe states: pure vectors on `H_j (x) H_A`, their constructors, and the
//! text form used by the command line (`kind:key=val,...`).

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64};
use crate::spin::{self, parse_twice, Axis, CompositeSpace, HalfInt, Parity, SpinQuantum};

pub const NORM_TOL: f64 = 1e-12;
const DENSITY_TOL: f64 = 1e-10;

/// A unit-norm pure state on a composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: CompositeSpace,
    amps: CVector,
}

impl StateVector {
    pub fn new(space: CompositeSpace, amps: CVector) -> Result<Self> {
        check_len(space, &amps)?;
        let n = amps.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::Normalization(n));
        }
        Ok(Self { space, amps })
    }

    /// Normalize any nonzero vector.
    pub fn normalized(space: CompositeSpace, amps: CVector) -> Result<Self> {
        check_len(space, &amps)?;
        let n = amps.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Normalization(n));
        }
        Ok(Self { space, amps: amps.unscale(n) })
    }

    pub fn space(&self) -> CompositeSpace {
        self.space
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn spin(&self) -> Result<SpinQuantum> {
        self.space.spin_quantum()
    }

    pub fn with_global_phase(&self, theta: f64) -> Self {
        Self {
            space: self.space,
            amps: &self.amps * C64::from_polar(1.0, theta),
        }
    }

    /// `|<self|other>|^2`
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(linalg::inner(&self.amps, &other.amps).norm_sqr())
    }

    /// Apply a (unitary) matrix; the result is renormalized against roundoff.
    pub fn transformed(&self, u: &CMatrix) -> Result<Self> {
        if u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.ncols(),
            });
        }
        Self::normalized(self.space, u * &self.amps)
    }

    /// `|psi><psi|`
    pub fn density(&self) -> CMatrix {
        &self.amps * self.amps.adjoint()
    }

    /// `Tr_A |psi><psi|`
    pub fn reduced_system(&self) -> CMatrix {
        let d = self.space.system_dim;
        let a = self.space.ancilla_factor();
        CMatrix::from_fn(d, d, |i, k| (0..a).map(|l| self.amps[i * a + l] * self.amps[k * a + l].conj()).sum())
    }

    /// Tensor product of system-only states, as a single system of dimension `prod(d_i)`.
    pub fn product(factors: &[StateVector]) -> Result<Self> {
        let mut amps = CVector::from_element(1, c(1.0));
        for f in factors {
            if f.space.ancilla_dim != 0 {
                return Err(Error::InvalidConfig("product factors must not carry an ancilla".into()));
            }
            amps = amps.kronecker(&f.amps);
        }
        if factors.is_empty() {
            return Err(Error::InvalidConfig("empty product".into()));
        }
        let space = CompositeSpace::new(amps.len(), 0)?;
        Self::normalized(space, amps)
    }
}

fn check_len(space: CompositeSpace, amps: &CVector) -> Result<()> {
    if amps.len() != space.total_dim() {
        return Err(Error::DimensionMismatch {
            expected: space.total_dim(),
            found: amps.len(),
        });
    }
    Ok(())
}

fn system_state(j: SpinQuantum, amps: CVector) -> Result<StateVector> {
    StateVector::normalized(CompositeSpace::spin(j), amps)
}

/// Eigenstate of `J_axis` with eigenvalue `m` (given as `2m`).
pub fn dicke(j: SpinQuantum, two_m: i32, axis: Axis) -> Result<StateVector> {
    let k = j.index_of(two_m)?;
    let v = spin::eigenbasis(j, axis).swap_remove(k);
    system_state(j, v)
}

/// Coherent spin state `|j,j>_n`: the top eigenvector of `n . J`.
pub fn css(j: SpinQuantum, direction: [f64; 3]) -> Result<StateVector> {
    let len = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(len > 1e-12) || !len.is_finite() {
        return Err(Error::OutOfRange("CSS direction must be a nonzero vector".into()));
    }
    let n = direction.map(|x| x / len);
    let ops = spin::make_spin_ops(j);
    let (_, vecs) = linalg::hermitian_eigen(ops.along(n).matrix());
    let mut v = vecs.column(0).into_owned();
    linalg::fix_phase(&mut v);
    system_state(j, v)
}

/// Optimal joint-estimation probe: `|j,0>` for integer `j`; for semi-odd `j`
/// the system-ancilla state `(|j,1/2>|0> + e^{i phase}|j,-1/2>|1>)/sqrt(2)`.
pub fn joint_optimal(j: SpinQuantum, relative_phase: f64) -> StateVector {
    match j.parity() {
        Parity::Integer => dicke(j, 0, Axis::Z).expect("m = 0 is valid for integer j"),
        Parity::SemiOdd => {
            let space = CompositeSpace::with_ancilla(j, 2);
            let mut amps = CVector::zeros(space.total_dim());
            let up = j.index_of(1).expect("m = 1/2");
            let down = j.index_of(-1).expect("m = -1/2");
            amps[up * 2] = c(FRAC_1_SQRT_2);
            amps[down * 2 + 1] = C64::from_polar(FRAC_1_SQRT_2, relative_phase);
            StateVector::normalized(space, amps).expect("nonzero")
        }
    }
}

/// `(|j,j>_axis + e^{i xi}|j,-j>_axis)/sqrt(2)`, `axis` in {x, y}.
pub fn sequential_optimal(j: SpinQuantum, axis: Axis, xi: f64) -> Result<StateVector> {
    if axis == Axis::Z {
        return Err(Error::OutOfRange("sequential probes rotate about x or y".into()));
    }
    let basis = spin::eigenbasis(j, axis);
    let v = (&basis[0] + &basis[j.dim() - 1] * C64::from_polar(1.0, xi)).scale(FRAC_1_SQRT_2);
    system_state(j, v)
}

/// Spin-squeezed probe for estimating the rotation about x, built in the `J_y`
/// eigenbasis: `(|j,-1>_y + sqrt(2)|j,0>_y + |j,1>_y)/2` (integer `j`) or
/// `(|j,-1/2>_y + |j,1/2>_y)/sqrt(2)` (semi-odd `j`).
pub fn constructive_squeezed(j: SpinQuantum) -> Result<StateVector> {
    constructive_squeezed_along(j, Axis::Y)
}

/// The same construction in the `J_axis` eigenbasis. `axis = y` serves the
/// `phi_x` ensemble, `axis = x` the `phi_y` ensemble.
pub fn constructive_squeezed_along(j: SpinQuantum, axis: Axis) -> Result<StateVector> {
    let basis = spin::eigenbasis(j, axis);
    let at = |two_m: i32| -> Result<&CVector> { Ok(&basis[j.index_of(two_m)?]) };
    let v = match j.parity() {
        Parity::Integer => {
            if j.two_j() < 2 {
                return Err(Error::OutOfRange("integer branch needs j >= 1".into()));
            }
            (at(-2)? + at(0)?.scale(2f64.sqrt()) + at(2)?).scale(0.5)
        }
        Parity::SemiOdd => (at(-1)? + at(1)?).scale(FRAC_1_SQRT_2),
    };
    system_state(j, v)
}

pub(crate) fn validate_density(rho: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if !rho.is_square() {
        return Err(Error::InvalidDensityMatrix("not square".into()));
    }
    let herm = linalg::hermiticity_residual(rho);
    if herm > DENSITY_TOL {
        return Err(Error::InvalidDensityMatrix(format!("not Hermitian (residual {herm:e})")));
    }
    let tr = linalg::trace(rho);
    if (tr - c(1.0)).norm() > DENSITY_TOL {
        return Err(Error::InvalidDensityMatrix(format!("trace {tr} != 1")));
    }
    let (vals, vecs) = linalg::hermitian_eigen(rho);
    let min = vals.last().copied().unwrap_or(0.0);
    if min < -DENSITY_TOL {
        return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min:e}")));
    }
    Ok((vals, vecs))
}

/// Pure state on `H (x) H_A` with `dim H_A = rank(rho)` whose ancilla partial
/// trace is `rho`.
pub fn purify(rho: &CMatrix) -> Result<StateVector> {
    let (vals, vecs) = validate_density(rho)?;
    let d = rho.nrows();
    let kept: Vec<usize> = (0..d).filter(|&k| vals[k] > 1e-12).collect();
    let r = kept.len();
    let space = CompositeSpace::new(d, r)?;
    let mut amps = CVector::zeros(d * r);
    for (a, &k) in kept.iter().enumerate() {
        let w = vals[k].sqrt();
        for i in 0..d {
            amps[i * r + a] = vecs[(i, k)] * w;
        }
    }
    StateVector::normalized(space, amps)
}

/// Haar-random pure state on `space`.
pub fn random_state<R: Rng + ?Sized>(space: CompositeSpace, rng: &mut R) -> StateVector {
    let n = space.total_dim();
    let amps = CVector::from_iterator(
        n,
        (0..n).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))),
    );
    StateVector::normalized(space, amps).expect("gaussian vector is nonzero almost surely")
}

/// Random product state `|a> (x) |b>` of two spins, as a single system.
pub fn random_product<R: Rng + ?Sized>(j1: SpinQuantum, j2: SpinQuantum, rng: &mut R) -> StateVector {
    let a = random_state(CompositeSpace::spin(j1), rng);
    let b = random_state(CompositeSpace::spin(j2), rng);
    StateVector::product(&[a, b]).expect("system-only factors")
}

// ---------------------------------------------------------------------------
// Text form

/// Direction of a coherent spin state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Direction {
    Axis { axis: Axis, negative: bool },
    Polar { theta: f64, phi: f64 },
}

impl Direction {
    pub fn vector(&self) -> [f64; 3] {
        match *self {
            Direction::Axis { axis, negative } => axis.unit().map(|x| if negative { -x } else { x }),
            Direction::Polar { theta, phi } => [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()],
        }
    }
}

/// Parsed form of a probe-state description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpec {
    Dicke { j: Option<SpinQuantum>, two_m: i32, axis: Axis },
    Css { j: Option<SpinQuantum>, direction: Direction },
    Joint { j: Option<SpinQuantum>, phase: f64 },
    Seq { j: Option<SpinQuantum>, axis: Axis, xi: f64 },
    Squeezed { j: Option<SpinQuantum>, axis: Axis },
    Raw { amplitudes: Vec<C64>, j: Option<SpinQuantum>, ancilla: usize },
    Product { factors: Vec<StateSpec> },
}

impl StateSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser { src: text, pos: 0 };
        let spec = p.spec()?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(p.err("trailing input"));
        }
        Ok(spec)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            StateSpec::Dicke { .. } => "dicke",
            StateSpec::Css { .. } => "css",
            StateSpec::Joint { .. } => "joint",
            StateSpec::Seq { .. } => "seq",
            StateSpec::Squeezed { .. } => "squeezed",
            StateSpec::Raw { .. } => "raw",
            StateSpec::Product { .. } => "product",
        }
    }

    /// Spin named explicitly in the description, if any.
    pub fn spin(&self) -> Option<SpinQuantum> {
        match self {
            StateSpec::Dicke { j, .. }
            | StateSpec::Css { j, .. }
            | StateSpec::Joint { j, .. }
            | StateSpec::Seq { j, .. }
            | StateSpec::Squeezed { j, .. }
            | StateSpec::Raw { j, .. } => *j,
            StateSpec::Product { .. } => None,
        }
    }

    /// Build the state; `default_j` supplies `j` when the text omits it.
    pub fn build(&self, default_j: Option<SpinQuantum>) -> Result<StateVector> {
        let need_j = |j: &Option<SpinQuantum>| -> Result<SpinQuantum> {
            match (*j, default_j) {
                (Some(a), Some(b)) if a != b => Err(Error::InvalidConfig(format!(
                    "state names j = {a} but j = {b} was requested"
                ))),
                (Some(a), _) => Ok(a),
                (None, Some(b)) => Ok(b),
                (None, None) => Err(Error::InvalidConfig(format!("{}: j is required", self.kind()))),
            }
        };
        match self {
            StateSpec::Dicke { j, two_m, axis } => dicke(need_j(j)?, *two_m, *axis),
            StateSpec::Css { j, direction } => css(need_j(j)?, direction.vector()),
            StateSpec::Joint { j, phase } => Ok(joint_optimal(need_j(j)?, *phase)),
            StateSpec::Seq { j, axis, xi } => sequential_optimal(need_j(j)?, *axis, *xi),
            StateSpec::Squeezed { j, axis } => constructive_squeezed_along(need_j(j)?, *axis),
            StateSpec::Raw { amplitudes, j, ancilla } => {
                let n = amplitudes.len();
                let af = (*ancilla).max(1);
                let spin = match (*j, default_j) {
                    (None, None) => {
                        if n % af != 0 {
                            return Err(Error::DimensionMismatch { expected: af, found: n });
                        }
                        SpinQuantum::from_dim(n / af)?
                    }
                    _ => need_j(j)?,
                };
                let space = CompositeSpace::with_ancilla(spin, *ancilla);
                StateVector::normalized(space, CVector::from_vec(amplitudes.clone()))
            }
            StateSpec::Product { factors } => {
                let built = factors.iter().map(|f| f.build(None)).collect::<Result<Vec<_>>>()?;
                StateVector::product(&built)
            }
        }
    }
}

/// Parse a state description and build it.
pub fn parse_state_spec(text: &str, default_j: Option<SpinQuantum>) -> Result<StateVector> {
    StateSpec::parse(text)?.build(default_j)
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn fmt_complex(z: &C64) -> String {
    if z.im == 0.0 {
        fmt_f64(z.re)
    } else if z.im < 0.0 || z.im.is_sign_negative() {
        format!("{}{}i", fmt_f64(z.re), fmt_f64(z.im))
    } else {
        format!("{}+{}i", fmt_f64(z.re), fmt_f64(z.im))
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let jpart = |j: &Option<SpinQuantum>| j.map(|j| format!("j={j},")).unwrap_or_default();
        match self {
            StateSpec::Dicke { j, two_m, axis } => write!(f, "dicke:{}m={},axis={axis}", jpart(j), HalfInt(*two_m)),
            StateSpec::Css { j, direction } => match direction {
                Direction::Axis { axis, negative } => {
                    write!(f, "css:{}axis={}{axis}", jpart(j), if *negative { "-" } else { "" })
                }
                Direction::Polar { theta, phi } => {
                    write!(f, "css:{}theta={},phi={}", jpart(j), fmt_f64(*theta), fmt_f64(*phi))
                }
            },
            StateSpec::Joint { j, phase } => write!(f, "joint:{}phase={}", jpart(j), fmt_f64(*phase)),
            StateSpec::Seq { j, axis, xi } => write!(f, "seq:{}axis={axis},xi={}", jpart(j), fmt_f64(*xi)),
            StateSpec::Squeezed { j, axis } => write!(f, "squeezed:{}axis={axis}", jpart(j)),
            StateSpec::Raw { amplitudes, j, ancilla } => {
                let amps: Vec<String> = amplitudes.iter().map(fmt_complex).collect();
                write!(f, "raw:[{}]", amps.join(","))?;
                let mut opts = Vec::new();
                if let Some(j) = j {
                    opts.push(format!("j={j}"));
                }
                if *ancilla != 0 {
                    opts.push(format!("ancilla={ancilla}"));
                }
                if !opts.is_empty() {
                    write!(f, "/{}", opts.join(","))?;
                }
                Ok(())
            }
            StateSpec::Product { factors } => {
                f.write_str("product:")?;
                for s in factors {
                    write!(f, "({s})")?;
                }
                Ok(())
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { pos: self.pos, msg: msg.into() }
    }

    fn err_at(&self, pos: usize, msg: impl Into<String>) -> Error {
        Error::Parse { pos, msg: msg.into() }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, ch: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(ch) {
            self.pos += ch.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, ch: char) -> Result<()> {
        if self.eat(ch) {
            Ok(())
        } else {
            Err(self.err(format!("expected {ch:?}")))
        }
    }

    /// Read until one of `stops` (or end), returning the trimmed token and its start.
    fn token(&mut self, stops: &[char]) -> (usize, &'a str) {
        self.skip_ws();
        let start = self.pos;
        let len = self.rest().find(|ch| stops.contains(&ch)).unwrap_or(self.rest().len());
        self.pos += len;
        (start, self.src[start..start + len].trim())
    }

    fn spec(&mut self) -> Result<StateSpec> {
        let (kpos, kind) = self.token(&[':', ')']);
        let keyed = matches!(kind, "dicke" | "css" | "joint" | "seq" | "squeezed");
        // a keyed kind may stand alone when every parameter has a default
        if keyed && !self.rest().trim_start().starts_with(':') {
            return build_keyed(kind, Vec::new());
        }
        self.expect(':')?;
        match kind {
            "raw" => self.raw(),
            "product" => self.product(),
            "dicke" | "css" | "joint" | "seq" | "squeezed" => {
                let items = self.items()?;
                build_keyed(kind, items)
            }
            other => Err(self.err_at(kpos, format!("unknown state kind {other:?}"))),
        }
    }

    /// `key=val` or bare items separated by commas, up to `)` or end of input.
    fn items(&mut self) -> Result<Vec<Item<'a>>> {
        let mut out = Vec::new();
        loop {
            let (pos, tok) = self.token(&[',', ')']);
            if tok.is_empty() {
                return Err(self.err_at(pos, "empty item"));
            }
            let item = match tok.split_once('=') {
                Some((k, v)) => Item { pos, key: Some(k.trim()), value: v.trim() },
                None => Item { pos, key: None, value: tok },
            };
            out.push(item);
            if !self.eat(',') {
                break;
            }
        }
        Ok(out)
    }

    fn raw(&mut self) -> Result<StateSpec> {
        self.expect('[')?;
        let mut amplitudes = Vec::new();
        loop {
            let (pos, tok) = self.token(&[',', ']']);
            amplitudes.push(parse_complex(tok).map_err(|m| self.err_at(pos, m))?);
            if !self.eat(',') {
                break;
            }
        }
        self.expect(']')?;
        let mut j = None;
        let mut ancilla = 0;
        if self.eat('/') {
            for item in self.items()? {
                match item.key {
                    Some("j") => j = Some(parse_spin(&item, self)?),
                    Some("ancilla") => {
                        ancilla = item
                            .value
                            .parse()
                            .map_err(|_| self.err_at(item.pos, "ancilla must be a non-negative integer"))?
                    }
                    _ => return Err(self.err_at(item.pos, "raw accepts only j= and ancilla=")),
                }
            }
        }
        Ok(StateSpec::Raw { amplitudes, j, ancilla })
    }

    fn product(&mut self) -> Result<StateSpec> {
        let mut factors = Vec::new();
        while self.eat('(') {
            factors.push(self.spec()?);
            self.expect(')')?;
            self.eat('*');
        }
        if factors.len() < 2 {
            return Err(self.err("product needs at least two parenthesized factors"));
        }
        Ok(StateSpec::Product { factors })
    }
}

struct Item<'a> {
    pos: usize,
    key: Option<&'a str>,
    value: &'a str,
}

fn parse_spin(item: &Item<'_>, p: &Parser<'_>) -> Result<SpinQuantum> {
    item.value
        .parse::<SpinQuantum>()
        .map_err(|e| p.err_at(item.pos, e.to_string()))
}

fn build_keyed(kind: &str, items: Vec<Item<'_>>) -> Result<StateSpec> {
    let err = |pos: usize, msg: String| Error::Parse { pos, msg };
    let mut j = None;
    let mut two_m = None;
    let mut axis: Option<(Axis, bool)> = None;
    let mut reals: Vec<(&str, f64)> = Vec::new();
    for item in &items {
        match (item.key, item.value) {
            (None, v) if kind == "css" => axis = Some(parse_signed_axis(v).map_err(|m| err(item.pos, m))?),
            (None, v) => return Err(err(item.pos, format!("expected key=value, found {v:?}"))),
            (Some("j"), v) => {
                j = Some(v.parse::<SpinQuantum>().map_err(|e| err(item.pos, e.to_string()))?);
            }
            (Some("m"), v) if kind == "dicke" => two_m = Some(parse_twice(v).map_err(|m| err(item.pos, m))?),
            (Some("axis"), v) => {
                let (a, neg) = parse_signed_axis(v).map_err(|m| err(item.pos, m))?;
                if neg && kind != "css" {
                    return Err(err(item.pos, "negative axis only allowed for css".into()));
                }
                axis = Some((a, neg));
            }
            (Some(k @ ("phase" | "xi" | "theta" | "phi")), v) => {
                let x: f64 = v
                    .parse()
                    .ok()
                    .filter(|x: &f64| x.is_finite())
                    .ok_or_else(|| err(item.pos, format!("{k}: cannot parse {v:?} as a real number")))?;
                reals.push((k, x));
            }
            (Some(k), _) => return Err(err(item.pos, format!("unknown key {k:?} for {kind}"))),
        }
    }
    let real = |key: &str| reals.iter().rev().find(|(k, _)| *k == key).map(|(_, v)| *v);
    let allow = |keys: &[&str]| -> Result<()> {
        for (k, _) in &reals {
            if !keys.contains(k) {
                let pos = items.iter().find(|i| i.key == Some(*k)).map_or(0, |i| i.pos);
                return Err(err(pos, format!("key {k:?} not valid for {kind}")));
            }
        }
        Ok(())
    };
    let first = items.first().map_or(0, |i| i.pos);
    match kind {
        "dicke" => {
            allow(&[])?;
            let two_m = two_m.ok_or_else(|| err(first, "dicke requires m".into()))?;
            Ok(StateSpec::Dicke { j, two_m, axis: axis.map_or(Axis::Z, |a| a.0) })
        }
        "css" => {
            allow(&["theta", "phi"])?;
            let direction = match (axis, real("theta"), real("phi")) {
                (Some((axis, negative)), None, None) => Direction::Axis { axis, negative },
                (None, Some(theta), phi) => Direction::Polar { theta, phi: phi.unwrap_or(0.0) },
                (None, None, None) => Direction::Axis { axis: Axis::Z, negative: false },
                _ => return Err(err(first, "css takes either an axis or theta/phi".into())),
            };
            Ok(StateSpec::Css { j, direction })
        }
        "joint" => {
            allow(&["phase"])?;
            Ok(StateSpec::Joint { j, phase: real("phase").unwrap_or(0.0) })
        }
        "seq" => {
            allow(&["xi"])?;
            let axis = axis.map_or(Axis::X, |a| a.0);
            if axis == Axis::Z {
                return Err(err(first, "seq axis must be x or y".into()));
            }
            Ok(StateSpec::Seq { j, axis, xi: real("xi").unwrap_or(0.0) })
        }
        "squeezed" => {
            allow(&[])?;
            let axis = axis.map_or(Axis::Y, |a| a.0);
            if axis == Axis::Z {
                return Err(err(first, "squeezed axis must be x or y".into()));
            }
            Ok(StateSpec::Squeezed { j, axis })
        }
        _ => unreachable!("kind checked by caller"),
    }
}

fn parse_signed_axis(s: &str) -> std::result::Result<(Axis, bool), String> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    body.parse::<Axis>().map(|a| (a, neg)).map_err(|e| e.to_string())
}

/// `re`, `re+imi`, `re-imi` or `imi`.
fn parse_complex(tok: &str) -> std::result::Result<C64, String> {
    let tok = tok.trim();
    let bad = || format!("cannot parse amplitude {tok:?}");
    let num = |s: &str| -> std::result::Result<f64, String> {
        s.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(bad)
    };
    if tok.is_empty() {
        return Err("empty amplitude".into());
    }
    let Some(body) = tok.strip_suffix('i') else {
        return Ok(c(num(tok)?));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let im_of = |s: &str| -> std::result::Result<f64, String> {
        match s {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            other => num(other),
        }
    };
    match split {
        Some(k) => Ok(C64::new(num(&body[..k])?, im_of(&body[k..])?)),
        None => Ok(C64::new(0.0, im_of(body)?)),
    }
}

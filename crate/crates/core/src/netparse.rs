//! Network description language and the validated network / reaction
//! matrix types built from it.
//!
//! The language is line oriented, one statement per line, `#` starts a
//! comment:
//!
//! ```text
//! species A B
//! diff A 1.0
//! rxn A -> B 1.0
//! rxn B -> A 2.0
//! init A bump 1.0 0.5 1
//! init B const 2.0
//! grid 128
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CrnError, ParseError, ParseErrorKind, Result};

pub const DEFAULT_GRID_CELLS: usize = 128;

/// Column-sum tolerance of a valid reaction matrix.
pub const COLUMN_SUM_TOL: f64 = 1e-12;

/// Initial concentration profile on the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProfile {
    Const { c: f64 },
    /// `left` for `x < x0`, `right` otherwise.
    Step { left: f64, right: f64, x0: f64 },
    /// `c + amp * cos(mode * pi * x)`.
    Bump { c: f64, amp: f64, mode: u32 },
}

impl InitialProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialProfile::Const { c } => c,
            InitialProfile::Step { left, right, x0 } => {
                if x < x0 {
                    left
                } else {
                    right
                }
            }
            InitialProfile::Bump { c, amp, mode } => {
                c + amp * (f64::from(mode) * std::f64::consts::PI * x).cos()
            }
        }
    }

    /// Mean over [0, 1] of the continuous profile.
    pub fn mean(&self) -> f64 {
        match *self {
            InitialProfile::Const { c } => c,
            InitialProfile::Step { left, right, x0 } => {
                let x0 = x0.clamp(0.0, 1.0);
                left * x0 + right * (1.0 - x0)
            }
            InitialProfile::Bump { c, amp, mode } => {
                if mode == 0 {
                    c + amp
                } else {
                    c
                }
            }
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be a nonnegative number, got {v}"))
            }
        };
        match *self {
            InitialProfile::Const { c } => nonneg("c", c),
            InitialProfile::Step { left, right, x0 } => {
                nonneg("c_left", left)?;
                nonneg("c_right", right)?;
                nonneg("x0", x0)
            }
            InitialProfile::Bump { c, amp, .. } => {
                nonneg("c", c)?;
                if !amp.is_finite() || amp.abs() > c {
                    return Err(format!("bump amplitude must satisfy |amp| <= c, got amp={amp}, c={c}"));
                }
                Ok(())
            }
        }
    }

    fn write_dsl(&self, out: &mut String) {
        match *self {
            InitialProfile::Const { c } => write!(out, "const {c}"),
            InitialProfile::Step { left, right, x0 } => write!(out, "step {left} {right} {x0}"),
            InitialProfile::Bump { c, amp, mode } => write!(out, "bump {c} {amp} {mode}"),
        }
        .expect("write to String");
    }
}

/// A validated first-order reaction-diffusion network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReactionNetwork {
    species: Vec<String>,
    /// `(target, source) -> a_{target,source}`, all strictly positive.
    rates: BTreeMap<(usize, usize), f64>,
    diffusions: Vec<f64>,
    initial_profiles: Vec<InitialProfile>,
    grid_cells: usize,
}

impl ReactionNetwork {
    /// Builds a network from already-resolved parts, enforcing the same
    /// invariants as the parser.
    pub fn new(
        species: Vec<String>,
        rates: BTreeMap<(usize, usize), f64>,
        diffusions: Vec<f64>,
        initial_profiles: Vec<InitialProfile>,
        grid_cells: usize,
    ) -> Result<Self> {
        let err = |kind| CrnError::Parse(ParseError::new(0, kind));
        let n = species.len();
        if n == 0 {
            return Err(err(ParseErrorKind::NoSpecies));
        }
        if diffusions.len() != n || initial_profiles.len() != n {
            return Err(CrnError::Dimension(format!(
                "{n} species but {} diffusions and {} profiles",
                diffusions.len(),
                initial_profiles.len()
            )));
        }
        for (i, name) in species.iter().enumerate() {
            if !is_valid_name(name) {
                return Err(err(ParseErrorKind::Syntax(format!("invalid species name `{name}`"))));
            }
            if species[..i].contains(name) {
                return Err(err(ParseErrorKind::DuplicateSpecies(name.clone())));
            }
        }
        for (&(target, source), &rate) in &rates {
            if target >= n || source >= n {
                return Err(CrnError::Dimension(format!("rate index ({target}, {source}) out of range")));
            }
            if target == source {
                return Err(err(ParseErrorKind::SelfReaction(species[target].clone())));
            }
            if !(rate.is_finite() && rate > 0.0) {
                return Err(err(ParseErrorKind::NonPositiveRate(rate)));
            }
        }
        for &d in &diffusions {
            if !(d.is_finite() && d >= 0.0) {
                return Err(err(ParseErrorKind::NegativeDiffusion(d)));
            }
        }
        for p in &initial_profiles {
            p.validate().map_err(|m| err(ParseErrorKind::InvalidProfile(m)))?;
        }
        if grid_cells < 2 {
            return Err(err(ParseErrorKind::InvalidGrid(grid_cells.to_string())));
        }
        if initial_profiles.iter().all(|p| p.mean() <= 0.0) {
            return Err(err(ParseErrorKind::ZeroInitialMass));
        }
        Ok(Self { species, rates, diffusions, initial_profiles, grid_cells })
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    /// Rate constant of `source -> target`, zero when absent.
    pub fn rate(&self, target: usize, source: usize) -> f64 {
        self.rates.get(&(target, source)).copied().unwrap_or(0.0)
    }

    /// Reactions as `(target, source, rate)` in `(target, source)` order.
    pub fn reactions(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rates.iter().map(|(&(t, s), &r)| (t, s, r))
    }

    pub fn n_reactions(&self) -> usize {
        self.rates.len()
    }

    pub fn diffusions(&self) -> &[f64] {
        &self.diffusions
    }

    pub fn initial_profiles(&self) -> &[InitialProfile] {
        &self.initial_profiles
    }

    pub fn grid_cells(&self) -> usize {
        self.grid_cells
    }

    pub fn with_grid_cells(mut self, cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(ParseError::new(0, ParseErrorKind::InvalidGrid(cells.to_string())).into());
        }
        self.grid_cells = cells;
        Ok(self)
    }

    pub fn with_diffusions(self, diffusions: Vec<f64>) -> Result<Self> {
        let Self { species, rates, initial_profiles, grid_cells, .. } = self;
        Self::new(species, rates, diffusions, initial_profiles, grid_cells)
    }

    pub fn with_initial_profiles(self, profiles: Vec<InitialProfile>) -> Result<Self> {
        let Self { species, rates, diffusions, grid_cells, .. } = self;
        Self::new(species, rates, diffusions, profiles, grid_cells)
    }

    /// Every reaction rate multiplied by `factor` (used for time-rescaling checks).
    pub fn scaled(&self, rate_factor: f64, diffusion_factor: f64) -> Result<Self> {
        let rates = self.rates.iter().map(|(&k, &r)| (k, r * rate_factor)).collect();
        let diffusions = self.diffusions.iter().map(|d| d * diffusion_factor).collect();
        Self::new(
            self.species.clone(),
            rates,
            diffusions,
            self.initial_profiles.clone(),
            self.grid_cells,
        )
    }

    /// Canonical DSL text; parsing it yields an identical network.
    pub fn to_dsl(&self) -> String {
        let mut out = String::new();
        out.push_str("species");
        for s in &self.species {
            out.push(' ');
            out.push_str(s);
        }
        out.push('\n');
        for (i, d) in self.diffusions.iter().enumerate() {
            writeln!(out, "diff {} {}", self.species[i], d).expect("write to String");
        }
        for (t, s, r) in self.reactions() {
            writeln!(out, "rxn {} -> {} {}", self.species[s], self.species[t], r).expect("write to String");
        }
        for (i, p) in self.initial_profiles.iter().enumerate() {
            write!(out, "init {} ", self.species[i]).expect("write to String");
            p.write_dsl(&mut out);
            out.push('\n');
        }
        writeln!(out, "grid {}", self.grid_cells).expect("write to String");
        out
    }

    /// SHA-256 of the canonical DSL text, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_dsl().as_bytes()))
    }
}

pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Decimal float with optional sign, fraction and exponent. Rejects
/// `inf`, `nan` and hex forms that `f64::from_str` would otherwise take.
fn parse_float(token: &str) -> Option<f64> {
    let bytes = token.as_bytes();
    let mut i = 0;
    if matches!(bytes.first(), Some(b'+' | b'-')) {
        i += 1;
    }
    let mantissa_start = i;
    let mut digits = 0;
    let mut seen_dot = false;
    while i < bytes.len() {
        match bytes[i] {
            b'0'..=b'9' => digits += 1,
            b'.' if !seen_dot => seen_dot = true,
            _ => break,
        }
        i += 1;
    }
    if digits == 0 || i == mantissa_start {
        return None;
    }
    if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
        i += 1;
        if matches!(bytes.get(i), Some(b'+' | b'-')) {
            i += 1;
        }
        let exp_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return None;
        }
    }
    if i != bytes.len() {
        return None;
    }
    token.parse::<f64>().ok().filter(|v| v.is_finite())
}

enum Statement<'a> {
    Species(Vec<&'a str>),
    Diff(&'a str, f64),
    Rxn(&'a str, &'a str, f64),
    Init(&'a str, InitialProfile),
    Grid(usize),
}

fn parse_statement<'a>(tokens: &[&'a str]) -> std::result::Result<Statement<'a>, ParseErrorKind> {
    let syntax = |m: &str| ParseErrorKind::Syntax(m.to_string());
    let float = |tok: &str| parse_float(tok).ok_or_else(|| ParseErrorKind::Syntax(format!("expected a number, got `{tok}`")));
    let name = |tok: &str| {
        if is_valid_name(tok) {
            Ok(())
        } else {
            Err(ParseErrorKind::Syntax(format!("invalid species name `{tok}`")))
        }
    };
    match tokens[0] {
        "species" => {
            if tokens.len() < 2 {
                return Err(syntax("`species` needs at least one name"));
            }
            for t in &tokens[1..] {
                name(t)?;
            }
            Ok(Statement::Species(tokens[1..].to_vec()))
        }
        "diff" => {
            let [_, s, d] = tokens else {
                return Err(syntax("expected `diff <name> <float>`"));
            };
            name(s)?;
            Ok(Statement::Diff(s, float(d)?))
        }
        "rxn" => {
            let [_, src, "->", dst, r] = tokens else {
                return Err(syntax("expected `rxn <name> -> <name> <float>`"));
            };
            name(src)?;
            name(dst)?;
            Ok(Statement::Rxn(src, dst, float(r)?))
        }
        "init" => {
            if tokens.len() < 3 {
                return Err(syntax("expected `init <name> <profile> ...`"));
            }
            name(tokens[1])?;
            let args = &tokens[3..];
            let profile = match (tokens[2], args) {
                ("const", [c]) => InitialProfile::Const { c: float(c)? },
                ("step", [l, r, x0]) => InitialProfile::Step { left: float(l)?, right: float(r)?, x0: float(x0)? },
                ("bump", [c, amp, mode]) => {
                    let m = float(mode)?;
                    if m < 0.0 || m.fract() != 0.0 || m > f64::from(u32::MAX) {
                        return Err(ParseErrorKind::InvalidProfile(format!(
                            "bump mode must be a nonnegative integer, got {mode}"
                        )));
                    }
                    InitialProfile::Bump { c: float(c)?, amp: float(amp)?, mode: m as u32 }
                }
                ("const" | "step" | "bump", _) => {
                    return Err(syntax("wrong number of profile parameters"));
                }
                (other, _) => return Err(ParseErrorKind::Syntax(format!("unknown profile `{other}`"))),
            };
            profile.validate().map_err(ParseErrorKind::InvalidProfile)?;
            Ok(Statement::Init(tokens[1], profile))
        }
        "grid" => {
            let [_, n] = tokens else {
                return Err(syntax("expected `grid <n>`"));
            };
            let cells: usize = n.parse().map_err(|_| ParseErrorKind::InvalidGrid(n.to_string()))?;
            if cells < 2 {
                return Err(ParseErrorKind::InvalidGrid(n.to_string()));
            }
            Ok(Statement::Grid(cells))
        }
        other => Err(ParseErrorKind::Syntax(format!("unknown statement `{other}`"))),
    }
}

/// Parses network text into a validated [`ReactionNetwork`].
///
/// Species may be referenced before the line that declares them; the
/// declaration order of `species` statements fixes the species order.
pub fn parse_network(text: &str) -> Result<ReactionNetwork> {
    let mut statements = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").replace("->", " -> ");
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let stmt = parse_statement(&tokens).map_err(|k| ParseError::new(lineno + 1, k))?;
        statements.push((lineno + 1, own(stmt)));
    }

    let mut species: Vec<String> = Vec::new();
    for (line, stmt) in &statements {
        if let OwnedStatement::Species(names) = stmt {
            for name in names {
                if species.contains(name) {
                    return Err(ParseError::new(*line, ParseErrorKind::DuplicateSpecies(name.clone())).into());
                }
                species.push(name.clone());
            }
        }
    }
    if species.is_empty() {
        return Err(ParseError::new(0, ParseErrorKind::NoSpecies).into());
    }
    let n = species.len();
    let lookup = |line: usize, name: &str| {
        species
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| ParseError::new(line, ParseErrorKind::UnknownSpecies(name.to_string())))
    };

    let mut rates = BTreeMap::new();
    let mut diffusions: Vec<Option<f64>> = vec![None; n];
    let mut profiles: Vec<Option<InitialProfile>> = vec![None; n];
    let mut grid = None;
    for (line, stmt) in &statements {
        let line = *line;
        match stmt {
            OwnedStatement::Species(_) => {}
            OwnedStatement::Diff(name, d) => {
                let i = lookup(line, name)?;
                if !(*d >= 0.0) {
                    return Err(ParseError::new(line, ParseErrorKind::NegativeDiffusion(*d)).into());
                }
                if diffusions[i].replace(*d).is_some() {
                    return Err(ParseError::new(
                        line,
                        ParseErrorKind::DuplicateStatement { statement: "diff", species: name.clone() },
                    )
                    .into());
                }
            }
            OwnedStatement::Rxn(src, dst, r) => {
                let s = lookup(line, src)?;
                let t = lookup(line, dst)?;
                if s == t {
                    return Err(ParseError::new(line, ParseErrorKind::SelfReaction(src.clone())).into());
                }
                if !(*r > 0.0) {
                    return Err(ParseError::new(line, ParseErrorKind::NonPositiveRate(*r)).into());
                }
                if rates.insert((t, s), *r).is_some() {
                    return Err(ParseError::new(line, ParseErrorKind::DuplicateReaction(src.clone(), dst.clone())).into());
                }
            }
            OwnedStatement::Init(name, p) => {
                let i = lookup(line, name)?;
                if profiles[i].replace(*p).is_some() {
                    return Err(ParseError::new(
                        line,
                        ParseErrorKind::DuplicateStatement { statement: "init", species: name.clone() },
                    )
                    .into());
                }
            }
            OwnedStatement::Grid(cells) => {
                if grid.replace(*cells).is_some() {
                    return Err(ParseError::new(line, ParseErrorKind::Syntax("`grid` given more than once".into())).into());
                }
            }
        }
    }

    ReactionNetwork::new(
        species,
        rates,
        diffusions.into_iter().map(|d| d.unwrap_or(0.0)).collect(),
        profiles.into_iter().map(|p| p.unwrap_or(InitialProfile::Const { c: 0.0 })).collect(),
        grid.unwrap_or(DEFAULT_GRID_CELLS),
    )
}

// Statements borrow from the per-line buffer, so they are copied out
// before the buffer is dropped.
enum OwnedStatement {
    Species(Vec<String>),
    Diff(String, f64),
    Rxn(String, String, f64),
    Init(String, InitialProfile),
    Grid(usize),
}

fn own(stmt: Statement<'_>) -> OwnedStatement {
    match stmt {
        Statement::Species(v) => OwnedStatement::Species(v.into_iter().map(str::to_string).collect()),
        Statement::Diff(s, d) => OwnedStatement::Diff(s.to_string(), d),
        Statement::Rxn(a, b, r) => OwnedStatement::Rxn(a.to_string(), b.to_string(), r),
        Statement::Init(s, p) => OwnedStatement::Init(s.to_string(), p),
        Statement::Grid(n) => OwnedStatement::Grid(n),
    }
}

/// Dense N x N reaction matrix: nonnegative off-diagonal entries and zero
/// column sums.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl ReactionMatrix {
    /// Builds `A` from a network. The diagonal is the negated sum of each
    /// column's off-diagonal entries.
    pub fn from_network(net: &ReactionNetwork) -> Self {
        let n = net.n_species();
        let mut entries = vec![0.0; n * n];
        for (t, s, r) in net.reactions() {
            entries[t * n + s] = r;
        }
        let mut m = Self { n, entries };
        m.close_columns();
        m
    }

    /// Validates a dense row-major matrix.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(CrnError::Dimension(format!("expected {} entries, got {}", n * n, entries.len())));
        }
        let m = Self { n, entries };
        for j in 0..n {
            let mut sum = 0.0;
            for i in 0..n {
                let a = m.get(i, j);
                if !a.is_finite() {
                    return Err(CrnError::Dimension(format!("entry ({i}, {j}) is not finite")));
                }
                if i != j && a < 0.0 {
                    return Err(CrnError::Dimension(format!("off-diagonal entry ({i}, {j}) = {a} is negative")));
                }
                sum += a;
            }
            if sum.abs() > COLUMN_SUM_TOL {
                return Err(CrnError::Dimension(format!("column {j} sums to {sum:e}")));
            }
        }
        Ok(m)
    }

    fn close_columns(&mut self) {
        let n = self.n;
        for j in 0..n {
            let off: f64 = (0..n).filter(|&i| i != j).map(|i| self.entries[i * n + j]).sum();
            self.entries[j * n + j] = -off;
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.entries)
    }

    /// `max_i |a_ii|`.
    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).abs()).fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.entries
            .chunks(self.n.max(1))
            .map(|row| row.iter().map(|a| a.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.entries.chunks(self.n.max(1)).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// Raw principal submatrix on `indices` (diagonal copied unchanged).
    pub fn principal_submatrix(&self, indices: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(indices.len() * indices.len());
        for &i in indices {
            for &j in indices {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// Reaction matrix of only the reactions among `indices`: the
    /// off-diagonal block with its diagonal recomputed so columns sum to zero.
    pub fn closed_block(&self, indices: &[usize]) -> ReactionMatrix {
        let k = indices.len();
        let mut entries = self.principal_submatrix(indices);
        for d in 0..k {
            entries[d * k + d] = 0.0;
        }
        let mut m = ReactionMatrix { n: k, entries };
        m.close_columns();
        m
    }
}

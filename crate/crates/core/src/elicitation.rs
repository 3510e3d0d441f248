//! Elicitation sessions: gamble scheduling, answer recording and the
//! adjacent-point bootstrap.
//!
//! An end-point gamble offers a sure chance `c` against winning the best
//! outcome (utility 1) with chance `p`, else the worst (utility 0). An
//! adjacent-point gamble replaces the prizes with the outcomes `c_lo < c <
//! c_hi` whose utilities were elicited earlier. The bootstrap anchors the
//! median sure value with end-point gambles and then bisects the remaining
//! intervals, so each adjacent gamble is only issued once both of its prize
//! utilities are known.
//!
//! Adjacent answers are fitted on the normalized sure value
//! `(c - c_lo) / (c_hi - c_lo)`; the fitted offset gives the indifference
//! chance `p*` and `U(c) = p* U(c_hi) + (1 - p*) U(c_lo)`.

use std::collections::{HashMap, HashSet};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consistency::{isotonic_adjust_weighted, merge_ties, ConsistencyError, PointMethod, UtilityPoint};
use crate::estimation::{
    estimate_offset, estimate_utility, ChoiceDataset, ChoiceObservation, EstimationConfig, EstimationError,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Sure values of the vehicle-reliability case study.
pub const CASE_STUDY_C_GRID: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];
/// Gamble chances used there for end-point gambles.
pub const CASE_STUDY_END_POINT_P: [f64; 8] = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95];
/// Gamble chances used there for adjacent-point gambles.
pub const CASE_STUDY_ADJACENT_P: [f64; 7] = [0.3, 0.4, 0.45, 0.5, 0.55, 0.6, 0.7];

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session plan: {0}")]
    InvalidPlan(String),
    #[error("no gamble with id {0:?} in this session")]
    UnknownGamble(String),
    #[error("gamble {0:?} has already been answered")]
    AlreadyAnswered(String),
    #[error("gamble {0:?} cannot be answered before its prize utilities are elicited")]
    NotReady(String),
    #[error("estimation failed at c={c}: {source}")]
    Estimation {
        c: f64,
        #[source]
        source: EstimationError,
    },
    #[error(transparent)]
    Consistency(#[from] ConsistencyError),
    #[error("unsupported session schema version {found} (this build reads version {SCHEMA_VERSION})")]
    UnsupportedVersion { found: u64 },
    #[error("session document has no schema_version field")]
    MissingVersion,
    #[error("malformed session document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("session document is inconsistent with its plan: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    EndPoint,
    Adjacent,
    Mixed,
}

impl std::str::FromStr for SessionMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "end_point" => Ok(SessionMode::EndPoint),
            "adjacent" => Ok(SessionMode::Adjacent),
            "mixed" => Ok(SessionMode::Mixed),
            other => Err(format!("unknown session mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GambleKind {
    EndPoint,
    Adjacent,
}

fn default_repeats() -> usize {
    1
}

/// Everything needed to rebuild a session's schedule deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub mode: SessionMode,
    pub c_grid: Vec<f64>,
    /// Gamble chances per sure value: one shared list, or one list per `c`.
    /// End-point gambles use these; adjacent mode uses them for every gamble.
    pub p_grids: Vec<Vec<f64>>,
    /// Chances for adjacent gambles in mixed mode; empty means `p_grids`.
    #[serde(default)]
    pub adjacent_p_grids: Vec<Vec<f64>>,
    /// Presentations of each `(c, p)` pair.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    pub seed: u64,
    /// Settings used to price adjacent-gamble prizes while the session runs.
    #[serde(default)]
    pub bootstrap: EstimationConfig,
}

impl SessionPlan {
    pub fn new(mode: SessionMode, c_grid: Vec<f64>, p_grid: Vec<f64>, seed: u64) -> Self {
        Self {
            mode,
            c_grid,
            p_grids: vec![p_grid],
            adjacent_p_grids: Vec::new(),
            repeats: 1,
            seed,
            bootstrap: EstimationConfig::default(),
        }
    }

    /// The case study's end-point schedule: 5 sure values by 8 chances.
    pub fn case_study_end_point(seed: u64) -> Self {
        Self::new(SessionMode::EndPoint, CASE_STUDY_C_GRID.to_vec(), CASE_STUDY_END_POINT_P.to_vec(), seed)
    }

    /// The case study's adjacent schedule: 5 sure values by 7 chances.
    pub fn case_study_adjacent(seed: u64) -> Self {
        Self::new(SessionMode::Adjacent, CASE_STUDY_C_GRID.to_vec(), CASE_STUDY_ADJACENT_P.to_vec(), seed)
    }

    fn validate(&self) -> Result<(), SessionError> {
        let bad = |m: String| Err(SessionError::InvalidPlan(m));
        let interior = |v: f64| v > 0.0 && v < 1.0;
        if self.c_grid.is_empty() {
            return bad("c grid is empty".into());
        }
        if let Some(c) = self.c_grid.iter().find(|c| !interior(**c)) {
            return bad(format!("sure value {c} must lie strictly inside (0, 1)"));
        }
        if self.c_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("c grid must be strictly increasing".into());
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        for (name, grids) in [("p_grids", &self.p_grids), ("adjacent_p_grids", &self.adjacent_p_grids)] {
            if grids.is_empty() && name == "adjacent_p_grids" {
                continue;
            }
            if grids.len() != 1 && grids.len() != self.c_grid.len() {
                return bad(format!("{name} needs one shared grid or one grid per sure value"));
            }
            for g in grids {
                if g.is_empty() {
                    return bad(format!("{name} contains an empty grid"));
                }
                if let Some(p) = g.iter().find(|p| !interior(**p)) {
                    return bad(format!("gamble chance {p} must lie strictly inside (0, 1)"));
                }
            }
        }
        self.bootstrap.bounds.validate().map_err(|e| SessionError::InvalidPlan(e.to_string()))?;
        Ok(())
    }

    fn end_point_grid(&self, idx: usize) -> &[f64] {
        if self.p_grids.len() == 1 { &self.p_grids[0] } else { &self.p_grids[idx] }
    }

    fn adjacent_grid(&self, idx: usize) -> &[f64] {
        match self.adjacent_p_grids.len() {
            0 => self.end_point_grid(idx),
            1 => &self.adjacent_p_grids[0],
            _ => &self.adjacent_p_grids[idx],
        }
    }

    /// Bootstrap order for adjacent elicitation: `(c index, lower bracket,
    /// upper bracket)` where `None` is the anchor 0 (lower) or 1 (upper).
    pub fn bootstrap_order(&self) -> Vec<(usize, Option<usize>, Option<usize>)> {
        let mut out = Vec::with_capacity(self.c_grid.len());
        let mut queue = std::collections::VecDeque::new();
        queue.push_back((0usize, self.c_grid.len(), None, None));
        while let Some((start, end, lo, hi)) = queue.pop_front() {
            if start >= end {
                continue;
            }
            let mid = start + (end - start - 1) / 2;
            out.push((mid, lo, hi));
            queue.push_back((start, mid, lo, Some(mid)));
            queue.push_back((mid + 1, end, Some(mid), hi));
        }
        out
    }
}

/// A gamble as presented: sure chance `c` versus outcome `outcome_hi`
/// (utility `prize_hi`) with chance `p`, else `outcome_lo` (utility `prize_lo`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GambleSpec {
    pub id: String,
    pub c: f64,
    pub p: f64,
    pub prize_hi: f64,
    pub prize_lo: f64,
    pub outcome_hi: f64,
    pub outcome_lo: f64,
    pub kind: GambleKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingGamble {
    pub id: String,
    pub c: f64,
    pub p: f64,
    pub kind: GambleKind,
    pub outcome_lo: f64,
    pub outcome_hi: f64,
    /// `(prize_lo, prize_hi)` once both prize utilities are known.
    pub prizes: Option<(f64, f64)>,
}

impl PendingGamble {
    fn issue(&self) -> Option<GambleSpec> {
        self.prizes.map(|(lo, hi)| GambleSpec {
            id: self.id.clone(),
            c: self.c,
            p: self.p,
            prize_hi: hi,
            prize_lo: lo,
            outcome_hi: self.outcome_hi,
            outcome_lo: self.outcome_lo,
            kind: self.kind,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsweredGamble {
    pub gamble: GambleSpec,
    pub y: bool,
    /// Wall-clock milliseconds since the Unix epoch; informational only.
    pub answered_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NextGamble {
    Gamble(GambleSpec),
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub answered: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub schema_version: u32,
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_token: Option<String>,
    pub plan: SessionPlan,
    pub pending: Vec<PendingGamble>,
    pub answered: Vec<AnsweredGamble>,
    /// Bootstrap utilities used to price adjacent prizes.
    pub estimates: Vec<UtilityPoint>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn build_schedule(plan: &SessionPlan) -> Vec<PendingGamble> {
    let mut rng = ChaCha20Rng::seed_from_u64(plan.seed);
    let mut out = Vec::new();
    let mut push_block = |rng: &mut ChaCha20Rng, idx: usize, kind: GambleKind, lo: f64, hi: f64, grid: &[f64]| {
        let tag = match kind {
            GambleKind::EndPoint => 'e',
            GambleKind::Adjacent => 'a',
        };
        let mut block: Vec<PendingGamble> = (0..plan.repeats)
            .flat_map(|r| grid.iter().enumerate().map(move |(j, &p)| (r, j, p)))
            .map(|(r, j, p)| PendingGamble {
                id: format!("{tag}{idx}-{j}-{r}"),
                c: plan.c_grid[idx],
                p,
                kind,
                outcome_lo: lo,
                outcome_hi: hi,
                prizes: match kind {
                    GambleKind::EndPoint => Some((0.0, 1.0)),
                    GambleKind::Adjacent => None,
                },
            })
            .collect();
        block.shuffle(rng);
        out.extend(block);
    };
    let outcome = |b: Option<usize>, anchor: f64| b.map_or(anchor, |i| plan.c_grid[i]);

    match plan.mode {
        SessionMode::EndPoint | SessionMode::Mixed => {
            for idx in 0..plan.c_grid.len() {
                push_block(&mut rng, idx, GambleKind::EndPoint, 0.0, 1.0, plan.end_point_grid(idx));
            }
        }
        SessionMode::Adjacent => {}
    }
    match plan.mode {
        SessionMode::EndPoint => {}
        SessionMode::Adjacent | SessionMode::Mixed => {
            for (rank, (idx, lo, hi)) in plan.bootstrap_order().into_iter().enumerate() {
                if rank == 0 {
                    if plan.mode == SessionMode::Adjacent {
                        push_block(&mut rng, idx, GambleKind::EndPoint, 0.0, 1.0, plan.adjacent_grid(idx));
                    }
                    continue;
                }
                push_block(&mut rng, idx, GambleKind::Adjacent, outcome(lo, 0.0), outcome(hi, 1.0), plan.adjacent_grid(idx));
            }
        }
    }
    out
}

impl Session {
    pub fn create(id: impl Into<String>, plan: SessionPlan) -> Result<Self, SessionError> {
        plan.validate()?;
        let pending = build_schedule(&plan);
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            id: id.into(),
            client_token: None,
            plan,
            pending,
            answered: Vec::new(),
            estimates: Vec::new(),
        })
    }

    pub fn progress(&self) -> Progress {
        Progress { answered: self.answered.len(), total: self.answered.len() + self.pending.len() }
    }

    pub fn is_complete(&self) -> bool {
        self.pending.is_empty()
    }

    /// Next gamble to present, without removing it from the queue. Resolves
    /// adjacent prizes on demand.
    pub fn next_gamble(&mut self) -> Result<NextGamble, SessionError> {
        let Some(head) = self.pending.first() else {
            return Ok(NextGamble::Complete);
        };
        if head.prizes.is_none() {
            let (id, c) = (head.id.clone(), head.c);
            if !self.resolve_prizes(c)? {
                return Err(SessionError::NotReady(id));
            }
        }
        Ok(NextGamble::Gamble(self.pending[0].issue().expect("prizes resolved")))
    }

    /// Peek without resolving anything; `None` when the head still awaits prizes.
    pub fn peek(&self) -> Option<GambleSpec> {
        self.pending.first().and_then(PendingGamble::issue)
    }

    pub fn record_choice(&mut self, gamble_id: &str, y: bool) -> Result<&AnsweredGamble, SessionError> {
        self.record_choice_at(gamble_id, y, now_ms())
    }

    pub fn record_choice_at(&mut self, gamble_id: &str, y: bool, answered_at_ms: u64) -> Result<&AnsweredGamble, SessionError> {
        let Some(pos) = self.pending.iter().position(|g| g.id == gamble_id) else {
            return Err(if self.answered.iter().any(|a| a.gamble.id == gamble_id) {
                SessionError::AlreadyAnswered(gamble_id.to_string())
            } else {
                SessionError::UnknownGamble(gamble_id.to_string())
            });
        };
        if self.pending[pos].prizes.is_none() {
            let c = self.pending[pos].c;
            if !self.resolve_prizes(c)? {
                return Err(SessionError::NotReady(gamble_id.to_string()));
            }
        }
        let pending = self.pending.remove(pos);
        let gamble = pending.issue().expect("prizes resolved");
        self.answered.push(AnsweredGamble { gamble, y, answered_at_ms });
        Ok(self.answered.last().expect("just pushed"))
    }

    /// Rebuilds the session from its plan and replays every answer in order.
    pub fn replay(&self) -> Result<Session, SessionError> {
        let mut fresh = Session::create(self.id.clone(), self.plan.clone())?;
        fresh.client_token = self.client_token.clone();
        for a in &self.answered {
            fresh.record_choice_at(&a.gamble.id, a.y, a.answered_at_ms)?;
        }
        Ok(fresh)
    }

    pub fn to_json(&self) -> Result<String, SessionError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a persisted session, checking the schema version first and the
    /// schedule bookkeeping afterwards.
    pub fn from_json(text: &str) -> Result<Session, SessionError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("schema_version").and_then(serde_json::Value::as_u64) {
            None => return Err(SessionError::MissingVersion),
            Some(v) if v != SCHEMA_VERSION as u64 => return Err(SessionError::UnsupportedVersion { found: v }),
            Some(_) => {}
        }
        let session: Session = serde_json::from_value(value)?;
        session.check_integrity()?;
        Ok(session)
    }

    fn check_integrity(&self) -> Result<(), SessionError> {
        self.plan.validate()?;
        let expected: HashSet<String> = build_schedule(&self.plan).into_iter().map(|g| g.id).collect();
        let mut seen = HashSet::new();
        for id in self.pending.iter().map(|g| &g.id).chain(self.answered.iter().map(|a| &a.gamble.id)) {
            if !seen.insert(id.clone()) {
                return Err(SessionError::Corrupt(format!("gamble {id} appears twice")));
            }
            if !expected.contains(id) {
                return Err(SessionError::Corrupt(format!("gamble {id} is not in the schedule")));
            }
        }
        if seen.len() != expected.len() {
            return Err(SessionError::Corrupt("answered and pending gambles do not cover the schedule".into()));
        }
        Ok(())
    }

    fn answers_of(&self, c: f64, kind: GambleKind) -> impl Iterator<Item = &AnsweredGamble> {
        self.answered.iter().filter(move |a| a.gamble.c == c && a.gamble.kind == kind)
    }

    fn all_answered(&self, c: f64, kind: GambleKind) -> bool {
        !self.pending.iter().any(|g| g.c == c && g.kind == kind)
    }

    fn bootstrap_kind(&self, idx: usize) -> GambleKind {
        let anchor = self.plan.bootstrap_order()[0].0;
        if idx == anchor { GambleKind::EndPoint } else { GambleKind::Adjacent }
    }

    /// Utility of an outcome for bootstrap purposes, if available.
    fn bootstrap_utility(&self, outcome: f64) -> Option<f64> {
        if outcome == 0.0 || outcome == 1.0 {
            return Some(outcome);
        }
        self.estimates.iter().find(|e| e.c == outcome).map(|e| e.u)
    }

    /// Makes sure `c`'s bracket utilities are estimated and stamps them on
    /// its pending adjacent gambles. Returns false if some prerequisite
    /// answers are still missing.
    fn resolve_prizes(&mut self, c: f64) -> Result<bool, SessionError> {
        let Some(sample) = self.pending.iter().find(|g| g.c == c && g.kind == GambleKind::Adjacent) else {
            return Ok(true);
        };
        let (lo, hi) = (sample.outcome_lo, sample.outcome_hi);
        let mut prizes = [0.0; 2];
        for (slot, outcome) in [lo, hi].into_iter().enumerate() {
            prizes[slot] = match self.bootstrap_utility(outcome) {
                Some(u) => u,
                None => {
                    let idx = self.plan.c_grid.iter().position(|&v| v == outcome).expect("bracket is a grid value");
                    let kind = self.bootstrap_kind(idx);
                    if !self.all_answered(outcome, kind) {
                        return Ok(false);
                    }
                    let config = self.plan.bootstrap;
                    let point = chain_point(self, idx, kind, &config, |o| self.bootstrap_utility(o))?;
                    self.estimates.push(point);
                    self.estimates.sort_by(|a, b| a.c.total_cmp(&b.c));
                    point.u
                }
            };
        }
        for g in self.pending.iter_mut().filter(|g| g.c == c && g.kind == GambleKind::Adjacent) {
            g.prizes = Some((prizes[0], prizes[1]));
        }
        Ok(true)
    }

    /// Answers as `c,p,y` observations. Adjacent answers are reported on
    /// their normalized sure value.
    pub fn export_observations(&self, kind: GambleKind) -> Vec<ChoiceObservation> {
        self.answered
            .iter()
            .filter(|a| a.gamble.kind == kind)
            .map(|a| ChoiceObservation { c: normalized_c(&a.gamble), p: a.gamble.p, y: a.y })
            .collect()
    }
}

fn normalized_c(g: &GambleSpec) -> f64 {
    (g.c - g.outcome_lo) / (g.outcome_hi - g.outcome_lo)
}

fn estimation_error(c: f64) -> impl FnOnce(EstimationError) -> SessionError {
    move |source| SessionError::Estimation { c, source }
}

/// Utility of grid point `idx` from its `kind` answers. End-point answers go
/// straight through the estimator; adjacent answers are fitted on the
/// normalized scale and mapped through the bracket utilities from `lookup`.
fn chain_point<F>(
    session: &Session,
    idx: usize,
    kind: GambleKind,
    config: &EstimationConfig,
    lookup: F,
) -> Result<UtilityPoint, SessionError>
where
    F: Fn(f64) -> Option<f64>,
{
    let c = session.plan.c_grid[idx];
    let answers: Vec<&AnsweredGamble> = session.answers_of(c, kind).collect();
    let Some(first) = answers.first() else {
        return Err(estimation_error(c)(EstimationError::EmptyDataset));
    };
    match kind {
        GambleKind::EndPoint => {
            let obs = answers.iter().map(|a| ChoiceObservation::new(c, a.gamble.p, a.y)).collect::<Result<_, _>>();
            let data = obs.and_then(|o| ChoiceDataset::new(c, o)).map_err(estimation_error(c))?;
            Ok(estimate_utility(&data, config).map_err(estimation_error(c))?.point)
        }
        GambleKind::Adjacent => {
            let scaled = normalized_c(&first.gamble);
            let obs = answers.iter().map(|a| ChoiceObservation::new(scaled, a.gamble.p, a.y)).collect::<Result<_, _>>();
            let data = obs.and_then(|o| ChoiceDataset::new(scaled, o)).map_err(estimation_error(c))?;
            let fit = estimate_offset(&data, config).map_err(estimation_error(c))?;
            let (u_lo, u_hi) = match (lookup(first.gamble.outcome_lo), lookup(first.gamble.outcome_hi)) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => return Err(SessionError::NotReady(first.gamble.id.clone())),
            };
            let p_star = (scaled + fit.omega.value()).clamp(0.0, 1.0);
            let u = (p_star * u_hi + (1.0 - p_star) * u_lo).clamp(0.0, 1.0);
            Ok(UtilityPoint::from_utility(c, u, config.method.into())?)
        }
    }
}

/// Utility curve from a session's answers, one point per sure value that has
/// at least one answer, sorted by `c`.
///
/// End-point answers are fitted per `c`. Adjacent answers are re-chained
/// through the bootstrap order with `config`, so bracket utilities come from
/// the same estimation method. In mixed sessions both routes contribute and
/// points sharing a `c` are averaged, weighted by answer counts. With
/// `isotonic`, the curve is projected onto non-decreasing sequences.
pub fn compute_session_utilities(
    session: &Session,
    config: &EstimationConfig,
    isotonic: bool,
) -> Result<Vec<UtilityPoint>, SessionError> {
    let plan = &session.plan;
    let mut points: Vec<UtilityPoint> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();

    if matches!(plan.mode, SessionMode::EndPoint | SessionMode::Mixed) {
        for (idx, &c) in plan.c_grid.iter().enumerate() {
            let n = session.answers_of(c, GambleKind::EndPoint).count();
            if n > 0 {
                points.push(chain_point(session, idx, GambleKind::EndPoint, config, |_| None)?);
                weights.push(n as f64);
            }
        }
    }

    if matches!(plan.mode, SessionMode::Adjacent | SessionMode::Mixed) {
        let mut chain: HashMap<u64, f64> = HashMap::new();
        let lookup = |chain: &HashMap<u64, f64>, o: f64| {
            if o == 0.0 || o == 1.0 { Some(o) } else { chain.get(&o.to_bits()).copied() }
        };
        for (rank, (idx, _, _)) in plan.bootstrap_order().into_iter().enumerate() {
            let c = plan.c_grid[idx];
            let kind = if rank == 0 { GambleKind::EndPoint } else { GambleKind::Adjacent };
            let n = session.answers_of(c, kind).count();
            if n == 0 {
                continue;
            }
            let point = chain_point(session, idx, kind, config, |o| lookup(&chain, o))?;
            chain.insert(c.to_bits(), point.u);
            // in mixed mode the anchor's end-point fit is already in the curve
            if !(plan.mode == SessionMode::Mixed && rank == 0) {
                points.push(point);
                weights.push(n as f64);
            }
        }
    }

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].c.total_cmp(&points[b].c));
    let points: Vec<UtilityPoint> = order.iter().map(|&i| points[i]).collect();
    let weights: Vec<f64> = order.iter().map(|&i| weights[i]).collect();

    let merged = merge_ties(&points, &weights);
    let merged_weights: Vec<f64> = merged
        .iter()
        .map(|m| points.iter().zip(&weights).filter(|(p, _)| p.c == m.c).map(|(_, w)| w).sum())
        .collect();
    if isotonic {
        Ok(isotonic_adjust_weighted(&merged, &merged_weights)?)
    } else {
        Ok(merged)
    }
}

/// Marks whether a curve point carries a method tag a caller asked for.
pub fn point_method_matches(point: &UtilityPoint, config: &EstimationConfig) -> bool {
    point.method == PointMethod::from(config.method) || point.method == PointMethod::Adjusted
}

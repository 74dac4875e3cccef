//! Exact state of the continuous Preisach operator as a staircase of
//! dominant input extrema.
//!
//! The input history is reduced to an alternating sequence
//! `0, M1, m1, M2, m2, ..., current` with `M1 > M2 > ...` and
//! `0 < m1 < m2 < ...`. The leading `0` is the implicit base minimum (every
//! relay of the triangle is OFF at zero input). A relay `(a1, a2)` is ON iff
//! the last entry `>= a2` comes after the last entry `<= a1`.

use serde::{Deserialize, Serialize};

use super::density::Density;
use super::relay::Thresholds;
use crate::error::{Error, Result};

/// Reversals smaller than this do not create a new extremum.
pub const REVERSAL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Rising,
    Falling,
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StaircaseRepr", into = "StaircaseRepr")]
pub struct MemoryStaircase {
    maxima: Vec<f64>,
    minima: Vec<f64>,
    current: f64,
}

/// How to seed the operator state at the initial input.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// Input has risen from zero to `I0` with no earlier history.
    Virgin,
    Explicit(MemoryStaircase),
}

impl MemoryStaircase {
    /// State reached by a monotone rise from zero to `i0`. Relays with
    /// `alpha2 <= i0` are ON, as compatibility requires; everything else
    /// is OFF.
    pub fn virgin(i0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&i0) {
            return Err(Error::InvalidStaircase(format!("initial input {i0} outside [0, 1]")));
        }
        Ok(MemoryStaircase { maxima: vec![], minima: vec![], current: i0 })
    }

    pub fn new(maxima: Vec<f64>, minima: Vec<f64>, current: f64) -> Result<Self> {
        let s = MemoryStaircase { maxima, minima, current };
        s.validate()?;
        Ok(s)
    }

    pub fn init(i0: f64, mode: InitMode) -> Result<Self> {
        match mode {
            InitMode::Virgin => Self::virgin(i0),
            InitMode::Explicit(s) => {
                s.validate()?;
                if s.current != i0 {
                    return Err(Error::InvalidStaircase(format!(
                        "staircase current value {} differs from initial input {i0}",
                        s.current
                    )));
                }
                Ok(s)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidStaircase(msg));
        let all_finite = self.maxima.iter().chain(&self.minima).chain([&self.current]).all(|x| x.is_finite());
        if !all_finite {
            return bad("non-finite entry".into());
        }
        if self.maxima.len() != self.minima.len() && self.maxima.len() != self.minima.len() + 1 {
            return bad(format!(
                "{} maxima and {} minima cannot interleave as M1, m1, M2, ...",
                self.maxima.len(),
                self.minima.len()
            ));
        }
        if !(0.0..=1.0).contains(&self.current) {
            return bad(format!("current input {} outside [0, 1]", self.current));
        }
        let seq = self.recorded();
        // seq[0] is the base 0; odd entries are maxima, even entries minima
        for (k, &x) in seq.iter().enumerate().skip(1) {
            if !(0.0..=1.0).contains(&x) {
                return bad(format!("extremum {x} outside [0, 1]"));
            }
            if k >= 2 {
                let prev = seq[k - 2];
                let ok = if k % 2 == 1 { x < prev } else { x > prev };
                if !ok {
                    return bad(format!("extrema not strictly nested at position {k}: {prev} then {x}"));
                }
            }
            let neighbour = seq[k - 1];
            let ok = if k % 2 == 1 { x > neighbour } else { x < neighbour };
            if !ok {
                return bad(format!("extrema do not alternate at position {k}: {neighbour} then {x}"));
            }
        }
        let n = seq.len();
        let last = seq[n - 1];
        if n % 2 == 1 {
            // rising from the last minimum (or base), must stay below last maximum
            if self.current < last {
                return bad(format!("current {} below last minimum {last}", self.current));
            }
            if n >= 2 && self.current >= seq[n - 2] {
                return bad(format!("current {} exceeds last maximum {}", self.current, seq[n - 2]));
            }
        } else {
            if self.current > last {
                return bad(format!("current {} exceeds last maximum {last}", self.current));
            }
            if self.current <= seq[n - 2] {
                return bad(format!("current {} below last minimum {}", self.current, seq[n - 2]));
            }
        }
        Ok(())
    }

    pub fn maxima(&self) -> &[f64] {
        &self.maxima
    }

    pub fn minima(&self) -> &[f64] {
        &self.minima
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    fn rising(&self) -> bool {
        self.maxima.len() == self.minima.len()
    }

    /// Start of the current monotone excursion.
    fn excursion_start(&self) -> f64 {
        if self.rising() {
            self.minima.last().copied().unwrap_or(0.0)
        } else {
            *self.maxima.last().expect("falling state has a maximum")
        }
    }

    pub fn trend(&self) -> Trend {
        if self.current == self.excursion_start() {
            Trend::Flat
        } else if self.rising() {
            Trend::Rising
        } else {
            Trend::Falling
        }
    }

    /// Recorded history `0, M1, m1, ...` without the current value.
    fn recorded(&self) -> Vec<f64> {
        let mut seq = Vec::with_capacity(self.maxima.len() + self.minima.len() + 1);
        seq.push(0.0);
        for k in 0..self.maxima.len() {
            seq.push(self.maxima[k]);
            if let Some(&m) = self.minima.get(k) {
                seq.push(m);
            }
        }
        seq
    }

    /// Full sequence `0, M1, m1, ..., current`; odd positions are maxima.
    pub fn sequence(&self) -> Vec<f64> {
        let mut seq = self.recorded();
        seq.push(self.current);
        seq
    }

    /// Feed the next input sample; the path from the previous sample is
    /// taken to be monotone. Dominated extrema are wiped out.
    pub fn update(&mut self, x: f64) {
        let x = x.clamp(0.0, 1.0);
        if self.rising() {
            if x >= self.current {
                self.current = x;
                self.wipe_rising();
            } else if self.current - x > REVERSAL_TOL {
                self.maxima.push(self.current);
                self.current = x;
                self.wipe_falling();
            }
        } else if x <= self.current {
            self.current = x;
            self.wipe_falling();
        } else if x - self.current > REVERSAL_TOL {
            self.minima.push(self.current);
            self.current = x;
            self.wipe_rising();
        }
    }

    pub fn updated(&self, x: f64) -> Self {
        let mut next = self.clone();
        next.update(x);
        next
    }

    fn wipe_rising(&mut self) {
        while let Some(&m) = self.maxima.last() {
            if self.current >= m && self.rising() {
                self.maxima.pop();
                self.minima.pop();
            } else {
                break;
            }
        }
    }

    fn wipe_falling(&mut self) {
        loop {
            let floor = self.minima.last().copied().unwrap_or(0.0);
            if !self.rising() && self.current <= floor {
                self.maxima.pop();
                self.minima.pop();
            } else {
                break;
            }
        }
    }

    /// Upper end `phi` of the ON interval `[0, phi)` in `alpha1` for relays
    /// with upper threshold `alpha2`.
    pub fn on_boundary(&self, alpha2: f64) -> f64 {
        let seq = self.sequence();
        match seq.iter().rposition(|&e| e >= alpha2) {
            None => 0.0,
            Some(j) if j + 1 < seq.len() => seq[j + 1],
            Some(_) => alpha2,
        }
    }

    /// Relay state induced by the staircase.
    pub fn is_on(&self, alpha1: f64, alpha2: f64) -> bool {
        let seq = self.sequence();
        let last_hi = seq.iter().rposition(|&e| e >= alpha2);
        let last_lo = seq.iter().rposition(|&e| e <= alpha1);
        match (last_hi, last_lo) {
            (Some(h), Some(l)) => h > l,
            (Some(_), None) => true,
            _ => false,
        }
    }

    pub fn is_on_at(&self, th: Thresholds) -> bool {
        self.is_on(th.alpha1(), th.alpha2())
    }

    /// `v_nat` plus the measure of the ON region, summed band by band.
    pub fn output(&self, d: &Density) -> f64 {
        d.v_nat() + self.on_mass(d)
    }

    /// Measure of the ON region: one rectangle per dominant maximum plus a
    /// corner triangle under the most recent one.
    pub fn on_mass(&self, d: &Density) -> f64 {
        let e = self.sequence();
        let last = e.len() - 1;
        (1..=last).step_by(2).map(|i| band_mass(&|k| e[k], i, last, d)).sum()
    }

    /// Breakpoints in `alpha2` where the ON boundary changes shape.
    pub(crate) fn alpha2_breaks(&self) -> Vec<f64> {
        self.sequence().into_iter().skip(1).collect()
    }
}

/// Mass of the ON band hanging from the maximum at position `i` of a
/// sequence whose last index is `last`.
fn band_mass(e: &dyn Fn(usize) -> f64, i: usize, last: usize, d: &Density) -> f64 {
    let top = e(i);
    if i + 2 <= last {
        d.rect_mass(0.0, e(i + 1), e(i + 2), top)
    } else if i < last {
        let phi = e(i + 1);
        d.rect_mass(0.0, phi, phi, top) + d.triangle_mass(0.0, phi)
    } else {
        d.triangle_mass(0.0, top)
    }
}

/// Evaluates `mem.updated(x).output(d)` for many `x` from one committed
/// state in time independent of the history length. Bands whose three
/// defining entries survive any single update are summed once up front.
#[derive(Debug, Clone)]
pub struct OutputCache {
    /// Recorded history followed by the committed current value.
    ext: Vec<f64>,
    /// `prefix[j]`: total mass of bands fully defined by `ext[..=j]`.
    prefix: Vec<f64>,
    v_nat: f64,
}

impl OutputCache {
    pub fn new(mem: &MemoryStaircase, d: &Density) -> Self {
        let ext = mem.sequence();
        let mut prefix = vec![0.0; ext.len()];
        for j in 1..ext.len() {
            prefix[j] = prefix[j - 1];
            // band i is fixed once e[i + 2] is known
            if j >= 3 && (j - 2) % 2 == 1 {
                prefix[j] += d.rect_mass(0.0, ext[j - 1], ext[j], ext[j - 2]);
            }
        }
        OutputCache { ext, prefix, v_nat: d.v_nat() }
    }

    /// Operator output after a monotone move from the committed input to `x`.
    pub fn output_after(&self, x: f64, d: &Density) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self.landing(x) {
            Some(j) => self.v_nat + self.prefix[j - 1] + self.tail(j, x, d),
            None => {
                let n = self.ext.len() - 1;
                self.v_nat + self.prefix[n - 1] + self.tail(n, self.ext[n], d)
            }
        }
    }

    /// Make the move to `x` permanent, mirroring [`MemoryStaircase::update`].
    pub fn commit(&mut self, x: f64, d: &Density) {
        let x = x.clamp(0.0, 1.0);
        if let Some(j) = self.landing(x) {
            self.ext.truncate(j);
            self.prefix.truncate(j);
            self.ext.push(x);
            let mut last = self.prefix[j - 1];
            if j >= 3 && (j - 2) % 2 == 1 {
                last += d.rect_mass(0.0, self.ext[j - 1], x, self.ext[j - 2]);
            }
            self.prefix.push(last);
        }
    }

    /// Index the new current value `x` takes in the extended sequence after
    /// wiping, or `None` for a reversal below the noise threshold.
    fn landing(&self, x: f64) -> Option<usize> {
        let n = self.ext.len() - 1;
        let c = self.ext[n];
        let rising = n % 2 == 1;
        let mut keep = if (rising && x >= c) || (!rising && x <= c) {
            n
        } else if (x - c).abs() > REVERSAL_TOL {
            n + 1
        } else {
            return None;
        };
        // wipe dominated pairs; `keep` is the index of the new current
        loop {
            let j = keep;
            if j % 2 == 1 && j >= 3 && x >= self.ext[j - 2] {
                keep -= 2;
            } else if j % 2 == 0 && j >= 2 && x <= self.ext[j - 2] {
                if j == 2 {
                    keep = 1;
                    break;
                }
                keep -= 2;
            } else {
                break;
            }
        }
        Some(keep)
    }

    /// Bands that involve the entry at index `j` (the current value `x`).
    fn tail(&self, j: usize, x: f64, d: &Density) -> f64 {
        let e = |k: usize| if k == j { x } else { self.ext[k] };
        let first = if j >= 2 { j - 2 } else { 1 };
        (first..=j).filter(|i| i % 2 == 1).map(|i| band_mass(&e, i, j, d)).sum()
    }
}

#[derive(Serialize, Deserialize)]
struct StaircaseRepr {
    maxima: Vec<f64>,
    minima: Vec<f64>,
    current: f64,
    trend: Trend,
}

impl TryFrom<StaircaseRepr> for MemoryStaircase {
    type Error = Error;

    fn try_from(r: StaircaseRepr) -> Result<Self> {
        let s = MemoryStaircase::new(r.maxima, r.minima, r.current)?;
        if s.trend() != r.trend {
            return Err(Error::InvalidStaircase(format!(
                "trend {:?} inconsistent with history (expected {:?})",
                r.trend,
                s.trend()
            )));
        }
        Ok(s)
    }
}

impl From<MemoryStaircase> for StaircaseRepr {
    fn from(s: MemoryStaircase) -> Self {
        let trend = s.trend();
        StaircaseRepr { maxima: s.maxima, minima: s.minima, current: s.current, trend }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(xs: &[f64]) -> MemoryStaircase {
        let mut s = MemoryStaircase::virgin(xs[0]).unwrap();
        for &x in &xs[1..] {
            s.update(x);
        }
        s
    }

    #[test]
    fn virgin_state_has_empty_history() {
        let s = MemoryStaircase::init(1e-5, InitMode::Virgin).unwrap();
        assert!(s.maxima().is_empty() && s.minima().is_empty());
        assert_eq!(s.current(), 1e-5);
        assert!(!s.is_on(1e-6, 0.5));
        assert!(!s.is_on(0.0, 2e-5));
    }

    #[test]
    fn explicit_states_are_validated() {
        let ok = MemoryStaircase::new(vec![0.6], vec![0.1], 0.3).unwrap();
        assert!(MemoryStaircase::init(0.3, InitMode::Explicit(ok)).is_ok());
        assert!(MemoryStaircase::new(vec![0.2], vec![0.1], 0.3).is_err());
        assert!(MemoryStaircase::new(vec![0.2, 0.5], vec![0.1], 0.3).is_err());
        assert!(MemoryStaircase::new(vec![0.6], vec![], 0.7).is_err());
        assert!(MemoryStaircase::new(vec![], vec![0.1], 0.05).is_err());
        let s = MemoryStaircase::new(vec![0.6], vec![0.1], 0.3).unwrap();
        assert!(MemoryStaircase::init(0.4, InitMode::Explicit(s)).is_err());
    }

    #[test]
    fn rising_past_maxima_wipes_them() {
        let s = path(&[0.0, 0.5, 0.2, 0.4, 0.6]);
        assert!(s.maxima().is_empty() && s.minima().is_empty());
        assert_eq!(s.current(), 0.6);
        assert_eq!(s.trend(), Trend::Rising);
    }

    #[test]
    fn unchanged_input_is_identity() {
        let s = path(&[0.0, 0.5, 0.2]);
        assert_eq!(s.updated(0.2), s);
    }

    #[test]
    fn falling_after_peak_records_maximum() {
        let s = path(&[0.0, 0.5, 0.3]);
        assert_eq!(s.maxima(), &[0.5]);
        assert_eq!(s.current(), 0.3);
        assert_eq!(s.trend(), Trend::Falling);
    }

    #[test]
    fn falling_to_zero_clears_everything() {
        let s = path(&[0.0, 0.5, 0.3, 0.4, 0.0]);
        assert!(s.maxima().is_empty());
        assert_eq!(s.trend(), Trend::Flat);
    }

    #[test]
    fn tiny_reversals_are_ignored() {
        let s = path(&[0.0, 0.5, 0.5 - 1e-15]);
        assert!(s.maxima().is_empty());
        assert_eq!(s.current(), 0.5);
    }

    #[test]
    fn json_round_trip_and_trend_check() {
        let s = path(&[0.0, 0.7, 0.1, 0.5, 0.3]);
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"trend\":\"falling\""));
        let back: MemoryStaircase = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let wrong = r#"{"maxima":[0.6],"minima":[0.1],"current":0.3,"trend":"falling"}"#;
        assert!(serde_json::from_str::<MemoryStaircase>(wrong).is_err());
    }

    #[test]
    fn uniform_output_matches_area() {
        let d = Density::uniform(2.0).unwrap();
        // 0 -> 0.8 -> 0.3: ON region {a2 <= 0.8, a1 < min(a2, 0.3)}
        let s = path(&[0.0, 0.8, 0.3]);
        let area = 0.3 * 0.5 + 0.5 * 0.3 * 0.3;
        assert!((s.output(&d) - 2.0 * area).abs() < 1e-15);
        let rising = path(&[0.0, 0.4]);
        assert!((rising.output(&d) - 2.0 * 0.08).abs() < 1e-15);
    }

    #[test]
    fn cached_output_matches_direct_update() {
        let d = Density::gaussian(0.3, 0.6, 0.2).unwrap().with_v_nat(0.01).unwrap();
        let histories: [&[f64]; 4] = [&[0.0], &[0.0, 0.9, 0.1, 0.7, 0.3, 0.5], &[0.0, 0.9, 0.1, 0.7, 0.3], &[0.0, 0.4, 0.2]];
        for h in histories {
            let mem = path(h);
            let cache = OutputCache::new(&mem, &d);
            for k in 0..=40 {
                let x = k as f64 / 40.0;
                let direct = mem.updated(x).output(&d);
                assert!((cache.output_after(x, &d) - direct).abs() < 1e-14, "{h:?} x={x}");
            }
        }
    }

    #[test]
    fn cache_commit_tracks_staircase_updates() {
        let d = Density::gaussian(0.3, 0.6, 0.2).unwrap();
        let mut mem = MemoryStaircase::virgin(0.0).unwrap();
        let mut cache = OutputCache::new(&mem, &d);
        for &x in &[0.9, 0.1, 0.7, 0.7 + 1e-16, 0.3, 0.5, 0.45, 0.8, 0.2, 0.0, 0.6, 1.0, 0.4] {
            mem.update(x);
            cache.commit(x, &d);
            let fresh = OutputCache::new(&mem, &d);
            assert_eq!(cache.ext, fresh.ext);
            for (a, b) in cache.prefix.iter().zip(&fresh.prefix) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }
}

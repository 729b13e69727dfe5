//! Privacy/value preference profiles: bootstrapping from a questionnaire or
//! disclosure history, and adaptation from recorded user behavior.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::DisclosureEvent;
use crate::kb::{DataCategory, EntityId, KnowledgeBase};
use crate::nudge::Template;

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Segment {
    Fundamentalist,
    Pragmatist,
    Unconcerned,
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceProfile {
    pub segment: Segment,
    pub risk_threshold: f64,
    pub value_floor: f64,
    pub sensitive_floor: f64,
    pub reach_limit: u64,
    /// Per-category risk thresholds; initialised to `risk_threshold` and moved
    /// by adaptation.
    pub category_weights: BTreeMap<DataCategory, f64>,
    pub history_boundary_days: u32,
    #[serde(default)]
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreferenceError {
    #[error("expected {expected} answers, got {got}")]
    IncompleteAnswers { expected: usize, got: usize },
    #[error("answer {index} is {value}, expected 1..=5")]
    AnswerOutOfRange { index: usize, value: u8 },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

impl PreferenceProfile {
    /// Segment defaults: (risk_threshold, value_floor, sensitive_floor, reach_limit).
    pub fn for_segment(segment: Segment) -> Self {
        let (risk_threshold, value_floor, sensitive_floor, reach_limit) = match segment {
            Segment::Fundamentalist => (0.3, 0.6, 0.5, 3),
            Segment::Pragmatist => (0.5, 0.4, 0.6, 5),
            Segment::Unconcerned => (0.8, 0.2, 0.8, 10),
        };
        PreferenceProfile {
            segment,
            risk_threshold,
            value_floor,
            sensitive_floor,
            reach_limit,
            category_weights: DataCategory::ALL
                .iter()
                .map(|c| (*c, risk_threshold))
                .collect(),
            history_boundary_days: 30,
            version: 0,
        }
    }

    pub fn check(&self) -> Result<(), PreferenceError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(PreferenceError::InvalidProfile(format!("{name} {v} outside [0, 1]")))
            }
        };
        unit("risk_threshold", self.risk_threshold)?;
        unit("value_floor", self.value_floor)?;
        unit("sensitive_floor", self.sensitive_floor)?;
        if self.reach_limit < 1 {
            return Err(PreferenceError::InvalidProfile("reach_limit must be >= 1".into()));
        }
        if self.history_boundary_days < 1 {
            return Err(PreferenceError::InvalidProfile(
                "history_boundary_days must be >= 1".into(),
            ));
        }
        for category in DataCategory::ALL {
            match self.category_weights.get(&category) {
                Some(w) => unit(category.as_str(), *w)?,
                None => {
                    return Err(PreferenceError::InvalidProfile(format!(
                        "missing weight for category {category}"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Risk threshold applying to disclosures touching `categories`: the
    /// strictest per-category threshold, or `risk_threshold` when there are none.
    pub fn threshold_for(&self, categories: impl IntoIterator<Item = DataCategory>) -> f64 {
        categories
            .into_iter()
            .map(|c| {
                self.category_weights
                    .get(&c)
                    .copied()
                    .unwrap_or(self.risk_threshold)
            })
            .reduce(f64::min)
            .unwrap_or(self.risk_threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionItem {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikertScale {
    pub min: u8,
    pub max: u8,
    pub low: String,
    pub high: String,
}

/// The shipped ten-item concern battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Questionnaire {
    pub scale: LikertScale,
    pub items: Vec<QuestionItem>,
}

impl Questionnaire {
    pub fn bundled() -> &'static Questionnaire {
        static BATTERY: OnceLock<Questionnaire> = OnceLock::new();
        BATTERY.get_or_init(|| {
            serde_json::from_str(include_str!("../data/questionnaire.json"))
                .expect("bundled questionnaire is valid")
        })
    }
}

/// Likert responses (1..=5) to the bundled battery, in item order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuestionnaireAnswers(pub Vec<u8>);

pub const QUESTION_COUNT: usize = 10;

pub fn segment_for_mean_concern(mean: f64) -> Segment {
    if mean >= 3.5 {
        Segment::Fundamentalist
    } else if mean <= 2.0 {
        Segment::Unconcerned
    } else {
        Segment::Pragmatist
    }
}

pub fn bootstrap_from_questionnaire(
    answers: &QuestionnaireAnswers,
) -> Result<PreferenceProfile, PreferenceError> {
    if answers.0.len() != QUESTION_COUNT {
        return Err(PreferenceError::IncompleteAnswers {
            expected: QUESTION_COUNT,
            got: answers.0.len(),
        });
    }
    if let Some((index, value)) = answers
        .0
        .iter()
        .enumerate()
        .find(|(_, v)| !(1..=5).contains(*v))
    {
        return Err(PreferenceError::AnswerOutOfRange {
            index,
            value: *value,
        });
    }
    let sum: u32 = answers.0.iter().map(|v| u32::from(*v)).sum();
    let mean = f64::from(sum) / QUESTION_COUNT as f64;
    Ok(PreferenceProfile::for_segment(segment_for_mean_concern(mean)))
}

/// Items at or above this sensitivity make a disclosure count as sensitive.
pub const SENSITIVE_HISTORY_CUTOFF: f64 = 0.7;

/// Segment from past disclosures: the more sensitive packages a user has
/// already handed out, the less concerned they are taken to be.
pub fn classify_history(kb: &KnowledgeBase, log: &[DisclosureEvent]) -> Segment {
    if log.is_empty() {
        return Segment::Pragmatist;
    }
    let sensitive = log
        .iter()
        .filter(|e| kb.package_impact(e.package) >= SENSITIVE_HISTORY_CUTOFF)
        .count();
    let fraction = sensitive as f64 / log.len() as f64;
    if fraction >= 0.5 {
        Segment::Unconcerned
    } else if fraction <= 0.1 {
        Segment::Fundamentalist
    } else {
        Segment::Pragmatist
    }
}

/// Hook for swapping in a learned segment classifier.
pub trait SegmentClassifier {
    fn classify(&self, kb: &KnowledgeBase, history: &[DisclosureEvent]) -> Segment;
}

/// The built-in rule-based classifier.
#[derive(Debug, Clone, Copy, Default)]
pub struct HistoryRule;

impl SegmentClassifier for HistoryRule {
    fn classify(&self, kb: &KnowledgeBase, history: &[DisclosureEvent]) -> Segment {
        classify_history(kb, history)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    /// Clicks on the framework's own nudges.
    Internal,
    /// Changes made elsewhere, e.g. switching off location sharing.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Keep,
    More,
    Delete,
    DisableSharing,
    Ignore,
}

impl Action {
    pub fn is_protective(self) -> bool {
        matches!(self, Action::Delete | Action::DisableSharing)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Keep => "keep",
            Action::More => "more",
            Action::Delete => "delete",
            Action::DisableSharing => "disable_sharing",
            Action::Ignore => "ignore",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NudgeRef {
    pub id: String,
    pub template: Template,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorEvent {
    pub id: u64,
    pub timestamp: i64,
    pub kind: BehaviorKind,
    pub action: Action,
    #[serde(default)]
    pub nudge: Option<NudgeRef>,
    #[serde(default)]
    pub category: Option<DataCategory>,
    #[serde(default)]
    pub service: Option<EntityId>,
    /// Device-level control for external behavior, e.g. "location_sharing".
    #[serde(default)]
    pub control: Option<String>,
}

impl BehaviorEvent {
    /// Internal events reference a nudge; external ones a service or device control.
    pub fn is_well_formed(&self) -> bool {
        match self.kind {
            BehaviorKind::Internal => self.nudge.is_some(),
            BehaviorKind::External => self.service.is_some() || self.control.is_some(),
        }
    }
}

pub trait Timestamped {
    fn timestamp(&self) -> i64;
}

impl Timestamped for BehaviorEvent {
    fn timestamp(&self) -> i64 {
        self.timestamp
    }
}

impl Timestamped for DisclosureEvent {
    fn timestamp(&self) -> i64 {
        self.timestamp
    }
}

/// Partition at `now - history_boundary_days`. Events exactly at the boundary
/// are real-time. Order is preserved within each side.
pub fn split_history<T: Timestamped + Clone>(
    events: &[T],
    profile: &PreferenceProfile,
    now: i64,
) -> (Vec<T>, Vec<T>) {
    let boundary = now - i64::from(profile.history_boundary_days) * SECONDS_PER_DAY;
    events
        .iter()
        .cloned()
        .partition(|e| e.timestamp() < boundary)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptConfig {
    pub step: f64,
    pub trigger: usize,
    pub floor: f64,
    pub cap: f64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            step: 0.1,
            trigger: 3,
            floor: 0.05,
            cap: 0.95,
        }
    }
}

/// Move per-category thresholds in response to a window of behavior.
///
/// Per category, `trigger` or more protective actions lower the threshold by
/// `step`; `trigger` or more keep/ignore responses to nudges raise it by `step`.
/// Both together cancel. Results are clamped to `[floor, cap]`.
pub fn adapt(
    profile: &PreferenceProfile,
    window: &[BehaviorEvent],
    config: &AdaptConfig,
) -> PreferenceProfile {
    let mut protective: BTreeMap<DataCategory, usize> = BTreeMap::new();
    let mut lenient: BTreeMap<DataCategory, usize> = BTreeMap::new();
    for event in window {
        let Some(category) = event.category else { continue };
        if event.action.is_protective() {
            *protective.entry(category).or_default() += 1;
        } else if matches!(event.action, Action::Keep | Action::Ignore) && event.nudge.is_some() {
            *lenient.entry(category).or_default() += 1;
        }
    }

    let mut next = profile.clone();
    let mut changed = false;
    for category in DataCategory::ALL {
        let mut delta = 0.0;
        if protective.get(&category).copied().unwrap_or(0) >= config.trigger {
            delta -= config.step;
        }
        if lenient.get(&category).copied().unwrap_or(0) >= config.trigger {
            delta += config.step;
        }
        if delta == 0.0 {
            continue;
        }
        let current = next
            .category_weights
            .get(&category)
            .copied()
            .unwrap_or(profile.risk_threshold);
        let moved = (current + delta).clamp(config.floor, config.cap);
        if moved != current {
            next.category_weights.insert(category, moved);
            changed = true;
        }
    }
    if changed {
        next.version += 1;
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;

    fn answers(v: &[u8]) -> QuestionnaireAnswers {
        QuestionnaireAnswers(v.to_vec())
    }

    fn action(id: u64, action: Action, category: DataCategory) -> BehaviorEvent {
        BehaviorEvent {
            id,
            timestamp: id as i64,
            kind: BehaviorKind::Internal,
            action,
            nudge: Some(NudgeRef {
                id: "n".into(),
                template: Template::IssueDetail,
            }),
            category: Some(category),
            service: None,
            control: None,
        }
    }

    #[test]
    fn bundled_battery_has_ten_items() {
        let q = Questionnaire::bundled();
        assert_eq!(q.items.len(), QUESTION_COUNT);
        assert_eq!(q.items[0].id, "q1");
        assert_eq!(q.items[9].id, "q10");
    }

    #[test]
    fn segment_cutoffs_are_closed() {
        assert_eq!(segment_for_mean_concern(3.5), Segment::Fundamentalist);
        assert_eq!(segment_for_mean_concern(2.0), Segment::Unconcerned);
        assert_eq!(segment_for_mean_concern(3.4), Segment::Pragmatist);
        assert_eq!(segment_for_mean_concern(2.1), Segment::Pragmatist);
    }

    #[test]
    fn questionnaire_boundaries() {
        // Mean 3.5 exactly: five 3s and five 4s.
        let p = bootstrap_from_questionnaire(&answers(&[3, 4, 3, 4, 3, 4, 3, 4, 3, 4])).unwrap();
        assert_eq!(p.segment, Segment::Fundamentalist);
        // Mean 2.0 exactly.
        let p = bootstrap_from_questionnaire(&answers(&[1, 3, 1, 3, 1, 3, 1, 3, 1, 3])).unwrap();
        assert_eq!(p.segment, Segment::Unconcerned);
    }

    #[test]
    fn questionnaire_errors() {
        assert_eq!(
            bootstrap_from_questionnaire(&answers(&[3; 9])),
            Err(PreferenceError::IncompleteAnswers {
                expected: 10,
                got: 9
            })
        );
        assert!(matches!(
            bootstrap_from_questionnaire(&answers(&[3, 3, 3, 3, 3, 3, 3, 3, 3, 6])),
            Err(PreferenceError::AnswerOutOfRange { index: 9, value: 6 })
        ));
    }

    #[test]
    fn segment_defaults_pass_checks() {
        for seg in [Segment::Fundamentalist, Segment::Pragmatist, Segment::Unconcerned] {
            PreferenceProfile::for_segment(seg).check().unwrap();
        }
        let mut p = PreferenceProfile::for_segment(Segment::Pragmatist);
        p.category_weights.remove(&DataCategory::Medical);
        assert!(p.check().is_err());
    }

    #[test]
    fn threshold_for_takes_the_strictest_category() {
        let mut p = PreferenceProfile::for_segment(Segment::Pragmatist);
        p.category_weights.insert(DataCategory::Medical, 0.2);
        assert_eq!(p.threshold_for([DataCategory::Identity, DataCategory::Medical]), 0.2);
        assert_eq!(p.threshold_for([]), 0.5);
    }

    #[test]
    fn split_history_boundary_is_realtime() {
        let p = PreferenceProfile::for_segment(Segment::Pragmatist);
        let now = 100 * SECONDS_PER_DAY;
        let at = |days_ago: i64| action(0, Action::Keep, DataCategory::Other).with_ts(now - days_ago * SECONDS_PER_DAY);
        let events = vec![at(31), at(30), at(1)];
        let (hist, real) = split_history(&events, &p, now);
        assert_eq!(hist, vec![at(31)]);
        assert_eq!(real, vec![at(30), at(1)]);
        let (h, r) = split_history::<BehaviorEvent>(&[], &p, now);
        assert!(h.is_empty() && r.is_empty());
    }

    impl BehaviorEvent {
        fn with_ts(mut self, ts: i64) -> Self {
            self.timestamp = ts;
            self
        }
    }

    #[test]
    fn adapt_ignores_below_trigger_and_unwarned_keeps() {
        let p = PreferenceProfile::for_segment(Segment::Pragmatist);
        let window: Vec<_> = (0..2)
            .map(|i| action(i, Action::Delete, DataCategory::Medical))
            .collect();
        assert_eq!(adapt(&p, &window, &AdaptConfig::default()), p);
        let mut unwarned: Vec<_> = (0..3)
            .map(|i| action(i, Action::Keep, DataCategory::Medical))
            .collect();
        for e in &mut unwarned {
            e.nudge = None;
        }
        assert_eq!(adapt(&p, &unwarned, &AdaptConfig::default()), p);
    }

    #[test]
    fn adapt_clamps_at_floor() {
        let mut p = PreferenceProfile::for_segment(Segment::Fundamentalist);
        p.category_weights.insert(DataCategory::Medical, 0.1);
        let window: Vec<_> = (0..3)
            .map(|i| action(i, Action::DisableSharing, DataCategory::Medical))
            .collect();
        let next = adapt(&p, &window, &AdaptConfig::default());
        assert_eq!(next.category_weights[&DataCategory::Medical], 0.05);
        assert_eq!(next.version, p.version + 1);
        let again = adapt(&next, &window, &AdaptConfig::default());
        assert_eq!(again, next);
    }
}

//! Offer dispatch, response feedback, dashboard statistics and the
//! unlocked auto-classification step.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassScore, ClassifierError, LabeledDoc, TfIdfModel};
use crate::labeling::{ClassificationTask, LabelGroup, LabelLedger, LabelOrigin, LabelRecord};
use crate::sequence::Sequencer;

/// Active labels needed in each class before auto-classification unlocks.
pub const UNLOCK_MIN_PER_CLASS: usize = 3;

/// Predictions listed on the dashboard, newest first.
pub const RECENT_OUTCOMES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OfferError {
    #[error("unknown offer `{0}`")]
    UnknownOffer(String),
    #[error("offer `{0}` already has a response")]
    AlreadyResponded(String),
    #[error("classifier is locked: {positive} positive and {negative} negative labels, {required} per class required")]
    LockedClassifier { positive: usize, negative: usize, required: usize },
    #[error("no eligible users left to classify")]
    NoEligibleUsers,
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OfferStatus {
    Pending,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Offer {
    pub offer_id: String,
    pub ct_id: String,
    pub user_id: String,
    pub message: String,
    pub predicted_label: String,
    pub status: OfferStatus,
    pub dispatched_at: u64,
    pub responded_at: Option<u64>,
}

impl Offer {
    pub fn is_open(&self) -> bool {
        self.status == OfferStatus::Pending
    }
}

pub fn has_open_offer(offers: &[Offer], ct_id: &str, user_id: &str) -> bool {
    offers
        .iter()
        .any(|o| o.ct_id == ct_id && o.user_id == user_id && o.is_open())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispatchReport {
    pub created: Vec<Offer>,
    /// Users passed over because an offer is already open for them.
    pub skipped: Vec<String>,
}

/// Builds one pending offer per user without an open offer for the task.
/// The caller stores `created`.
pub fn dispatch_offers(
    task: &ClassificationTask,
    users: &[String],
    offers: &[Offer],
    seq: &mut Sequencer,
) -> DispatchReport {
    let mut report = DispatchReport::default();
    let mut seen = BTreeSet::new();
    for user in users {
        if !seen.insert(user.as_str()) {
            continue;
        }
        if has_open_offer(offers, &task.ct_id, user) {
            report.skipped.push(user.clone());
            continue;
        }
        report.created.push(Offer {
            offer_id: seq.offer_id(),
            ct_id: task.ct_id.clone(),
            user_id: user.clone(),
            message: task.offer_message.clone(),
            predicted_label: task.positive_label.clone(),
            status: OfferStatus::Pending,
            dispatched_at: seq.tick(),
            responded_at: None,
        });
    }
    report
}

/// Closes a pending offer and turns the response into a feedback label.
pub fn record_response(
    offers: &mut [Offer],
    offer_id: &str,
    accepted: bool,
    task: &ClassificationTask,
    now: u64,
) -> Result<LabelRecord, OfferError> {
    let offer = offers
        .iter_mut()
        .find(|o| o.offer_id == offer_id && o.ct_id == task.ct_id)
        .ok_or_else(|| OfferError::UnknownOffer(offer_id.to_string()))?;
    if !offer.is_open() {
        return Err(OfferError::AlreadyResponded(offer_id.to_string()));
    }
    offer.status = if accepted { OfferStatus::Accepted } else { OfferStatus::Rejected };
    offer.responded_at = Some(now);
    let group = if accepted { LabelGroup::Positive } else { LabelGroup::Negative };
    Ok(LabelRecord {
        ct_id: task.ct_id.clone(),
        user_id: offer.user_id.clone(),
        label: task.label(group).to_string(),
        origin: LabelOrigin::OfferFeedback,
        created_at: now,
    })
}

/// One auto-classification outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub ct_id: String,
    pub user_id: String,
    pub predicted_label: String,
    /// Positive class first.
    pub scores: [ClassScore<String, f64>; 2],
    /// Training documents used by the refit that produced this prediction.
    pub training_docs: usize,
    pub offer_id: Option<String>,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DashboardStats {
    pub ct_id: String,
    pub accepted: usize,
    pub rejected: usize,
    pub pending: usize,
    pub dispatched: usize,
    pub prediction_accuracy: Option<f64>,
    pub labeled_total: usize,
    pub labeled_positive: usize,
    pub labeled_negative: usize,
    pub unlocked: bool,
    pub unlock_minimum: usize,
    pub recent_outcomes: Vec<Prediction>,
}

impl DashboardStats {
    pub fn is_conserved(&self) -> bool {
        self.accepted + self.rejected + self.pending == self.dispatched
    }
}

pub fn is_unlocked(task: &ClassificationTask, ledger: &LabelLedger) -> bool {
    let (positive, negative) = ledger.class_counts(task);
    positive >= UNLOCK_MIN_PER_CLASS && negative >= UNLOCK_MIN_PER_CLASS
}

pub fn compute_stats(
    task: &ClassificationTask,
    offers: &[Offer],
    ledger: &LabelLedger,
    predictions: &[Prediction],
) -> DashboardStats {
    let mut stats = DashboardStats {
        ct_id: task.ct_id.clone(),
        accepted: 0,
        rejected: 0,
        pending: 0,
        dispatched: 0,
        prediction_accuracy: None,
        labeled_total: 0,
        labeled_positive: 0,
        labeled_negative: 0,
        unlocked: false,
        unlock_minimum: UNLOCK_MIN_PER_CLASS,
        recent_outcomes: Vec::new(),
    };
    let mut confirming = 0usize;
    for offer in offers.iter().filter(|o| o.ct_id == task.ct_id) {
        stats.dispatched += 1;
        let predicted = task.group_of(&offer.predicted_label);
        match offer.status {
            OfferStatus::Pending => stats.pending += 1,
            OfferStatus::Accepted => {
                stats.accepted += 1;
                confirming += usize::from(predicted == Some(LabelGroup::Positive));
            }
            OfferStatus::Rejected => {
                stats.rejected += 1;
                confirming += usize::from(predicted == Some(LabelGroup::Negative));
            }
        }
    }
    let answered = stats.accepted + stats.rejected;
    if answered > 0 {
        stats.prediction_accuracy = Some(confirming as f64 / answered as f64);
    }
    let (positive, negative) = ledger.class_counts(task);
    stats.labeled_positive = positive;
    stats.labeled_negative = negative;
    stats.labeled_total = positive + negative;
    stats.unlocked = positive >= UNLOCK_MIN_PER_CLASS && negative >= UNLOCK_MIN_PER_CLASS;
    stats.recent_outcomes = predictions
        .iter()
        .rev()
        .filter(|p| p.ct_id == task.ct_id)
        .take(RECENT_OUTCOMES)
        .cloned()
        .collect();
    stats
}

/// Training corpus: every label record of the task (history included) with
/// the user's current summary, followed by the seed documents.
pub fn training_docs(
    task: &ClassificationTask,
    ledger: &LabelLedger,
    summaries: &BTreeMap<String, String>,
) -> Vec<LabeledDoc<String>> {
    let mut docs: Vec<LabeledDoc<String>> = ledger
        .history(&task.ct_id)
        .filter(|r| task.group_of(&r.label).is_some())
        .filter_map(|r| summaries.get(&r.user_id).map(|s| LabeledDoc::new(s.clone(), r.label.clone())))
        .collect();
    docs.extend(task.seed_docs.positive.iter().map(|t| LabeledDoc::new(t.clone(), task.positive_label.clone())));
    docs.extend(task.seed_docs.negative.iter().map(|t| LabeledDoc::new(t.clone(), task.negative_label.clone())));
    docs
}

pub fn refit(
    task: &ClassificationTask,
    ledger: &LabelLedger,
    summaries: &BTreeMap<String, String>,
) -> Result<TfIdfModel<f64, String>, OfferError> {
    Ok(TfIdfModel::fit(&training_docs(task, ledger, summaries))?)
}

/// Users that may be auto-classified: no active label, no open offer and
/// no earlier prediction for the task.
pub fn eligible_users<'a>(
    task: &ClassificationTask,
    summaries: &'a BTreeMap<String, String>,
    ledger: &LabelLedger,
    offers: &[Offer],
    predictions: &[Prediction],
) -> Vec<&'a str> {
    let predicted: BTreeSet<&str> = predictions
        .iter()
        .filter(|p| p.ct_id == task.ct_id)
        .map(|p| p.user_id.as_str())
        .collect();
    summaries
        .keys()
        .map(String::as_str)
        .filter(|u| ledger.active(&task.ct_id, u).is_none())
        .filter(|u| !has_open_offer(offers, &task.ct_id, u))
        .filter(|u| !predicted.contains(u))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOutcome {
    pub prediction: Prediction,
    pub offer: Option<Offer>,
}

/// Picks a random eligible user, refits, classifies their summary and
/// sends the offer when the prediction is positive. The prediction and
/// any offer are appended to the given collections.
#[allow(clippy::too_many_arguments)]
pub fn classify_new_user<R: Rng + ?Sized>(
    task: &ClassificationTask,
    summaries: &BTreeMap<String, String>,
    ledger: &LabelLedger,
    offers: &mut Vec<Offer>,
    predictions: &mut Vec<Prediction>,
    rng: &mut R,
    seq: &mut Sequencer,
) -> Result<ClassifyOutcome, OfferError> {
    let (positive, negative) = ledger.class_counts(task);
    if positive < UNLOCK_MIN_PER_CLASS || negative < UNLOCK_MIN_PER_CLASS {
        return Err(OfferError::LockedClassifier { positive, negative, required: UNLOCK_MIN_PER_CLASS });
    }
    let eligible = eligible_users(task, summaries, ledger, offers, predictions);
    if eligible.is_empty() {
        return Err(OfferError::NoEligibleUsers);
    }
    let user = eligible[rng.random_range(0..eligible.len())].to_string();

    let model = refit(task, ledger, summaries)?;
    let result = model.classify(&summaries[&user], &task.positive_label, &task.negative_label)?;

    let offer = if result.predicted == task.positive_label {
        let report = dispatch_offers(task, std::slice::from_ref(&user), offers, seq);
        report.created.into_iter().next()
    } else {
        None
    };
    let prediction = Prediction {
        ct_id: task.ct_id.clone(),
        user_id: user,
        predicted_label: result.predicted,
        scores: result.scores,
        training_docs: model.doc_count(),
        offer_id: offer.as_ref().map(|o| o.offer_id.clone()),
        created_at: seq.tick(),
    };
    if let Some(o) = &offer {
        offers.push(o.clone());
    }
    predictions.push(prediction.clone());
    Ok(ClassifyOutcome { prediction, offer })
}

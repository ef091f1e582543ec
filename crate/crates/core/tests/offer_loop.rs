mod common;

use common::{add_user, fallback_engine, introvert_spec, run_closed_loop, synthetic_user};
use persopilot_core::offers::OfferStatus;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn closed_loop_learns_separable_classes() {
    for seed in [1, 2, 3] {
        let report = run_closed_loop(seed, 20);
        assert_eq!(report.predictions, 20);
        assert!(report.match_rate() >= 0.9, "seed {seed}: {report:?}");
        assert_eq!(report.conservation_violations, 0);
        assert!(!report.ledger_shrank);
    }
}

#[test]
fn refits_grow_with_feedback() {
    let report = run_closed_loop(11, 20);
    assert!(report.doc_counts.windows(2).all(|w| w[0] <= w[1]), "{:?}", report.doc_counts);
    assert!(report.doc_counts.first() < report.doc_counts.last());
}

#[test]
fn same_seed_same_choices() {
    let a = run_closed_loop(5, 8);
    let b = run_closed_loop(5, 8);
    assert_eq!((a.matches, a.doc_counts), (b.matches, b.doc_counts));
}

#[test]
fn dispatch_respond_and_stats() {
    let mut e = fallback_engine(9);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..3 {
        synthetic_user(&mut e, &format!("in{i}"), true, &mut rng);
    }
    add_user(&mut e, "other");
    let ct = e.create_classification_task(introvert_spec()).unwrap().ct_id;
    let fresh = e.stats(&ct).unwrap();
    assert_eq!((fresh.accepted, fresh.rejected, fresh.pending, fresh.dispatched), (0, 0, 0, 0));
    assert_eq!(fresh.prediction_accuracy, None);
    assert_eq!(fresh.labeled_total, 0);

    for i in 0..3 {
        e.confirm_label(&ct, &format!("in{i}"), "introvert").unwrap();
    }
    e.confirm_label(&ct, "other", "extrovert").unwrap();
    let report = e.dispatch(&ct).unwrap();
    assert_eq!(report.created.len(), 3);
    assert!(report.created.iter().all(|o| o.status == OfferStatus::Pending));
    assert_eq!(e.user_offers("in0").unwrap().len(), 1);
    assert!(e.user_offers("other").unwrap().is_empty());

    let ledger_before = e.snapshot().label_records.len();
    let ids: Vec<String> = report.created.iter().map(|o| o.offer_id.clone()).collect();
    e.respond_offer(&ids[0], true).unwrap();
    e.respond_offer(&ids[1], false).unwrap();
    assert_eq!(e.snapshot().label_records.len(), ledger_before + 2);
    assert_eq!(e.respond_offer(&ids[0], false).unwrap_err().code(), "already_responded");

    let stats = e.stats(&ct).unwrap();
    assert_eq!((stats.accepted, stats.rejected, stats.pending, stats.dispatched), (1, 1, 1, 3));
    assert_eq!(stats.prediction_accuracy, Some(0.5));
    // in1 rejected: feedback supersedes the analyst label
    assert_eq!(e.snapshot().label_records.active(&ct, "in1").unwrap().label, "extrovert");
    assert_eq!((stats.labeled_positive, stats.labeled_negative), (2, 2));
    assert!(!stats.unlocked);
    assert_eq!(e.classify_random(&ct).unwrap_err().code(), "locked_classifier");

    // answered offers are not re-sent; the open one is reported as skipped
    let again = e.dispatch(&ct).unwrap();
    assert!(again.created.is_empty());
    assert_eq!(again.skipped, ["in2"]);
}

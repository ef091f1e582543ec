mod common;

use std::collections::BTreeSet;

use common::{build_graphs, cases, oracle_recommend, rec_case_strategy, scopes, Fact};
use persopilot_core::graph::{normalize_object, Relation};
use persopilot_core::recommender::{recommend, CommunityIndex};
use persopilot_core::Taxonomy;
use proptest::prelude::*;

proptest! {
    #![proptest_config(cases(1000))]

    #[test]
    fn matches_brute_force(case in rec_case_strategy()) {
        let tax = Taxonomy::reference();
        let graphs = build_graphs(&case.facts, case.users, &tax);
        let index = CommunityIndex::rebuild(&graphs, &tax);
        let requester = &graphs[case.requester];
        let got = recommend(&index, requester, &case.task, case.topic.as_deref(), case.k, &tax).unwrap();
        let want = oracle_recommend(&graphs, requester, &case.task, case.topic.as_deref(), case.k);
        prop_assert_eq!(got, want);
    }

    #[test]
    fn exclusion_scope_and_ranking(case in rec_case_strategy()) {
        let tax = Taxonomy::reference();
        let graphs = build_graphs(&case.facts, case.users, &tax);
        let index = CommunityIndex::rebuild(&graphs, &tax);
        let requester = &graphs[case.requester];
        let recs = recommend(&index, requester, &case.task, case.topic.as_deref(), case.k, &tax).unwrap();
        prop_assert!(recs.len() <= case.k);
        let held: BTreeSet<String> = requester
            .filter_by_task(&case.task, &tax)
            .unwrap()
            .iter()
            .map(|t| normalize_object(&t.object))
            .collect();
        let task = tax.task(&case.task).unwrap();
        for r in &recs {
            prop_assert!(!held.contains(&normalize_object(&r.object)));
            prop_assert!(task.topic(&r.topic_id).is_some());
            if let Some(topic) = &case.topic {
                prop_assert_eq!(&r.topic_id, topic);
            }
            prop_assert!(r.support >= 1);
            prop_assert!(!r.object.is_empty());
        }
        for w in recs.windows(2) {
            prop_assert!(w[0].support > w[1].support || (w[0].support == w[1].support && w[0].object <= w[1].object));
        }
    }

    #[test]
    fn index_counts_distinct_positive_users(case in rec_case_strategy()) {
        let tax = Taxonomy::reference();
        let graphs = build_graphs(&case.facts, case.users, &tax);
        let index = CommunityIndex::rebuild(&graphs, &tax);
        for (task, topic) in scopes() {
            for object in common::OBJECTS {
                let holders: BTreeSet<&str> = graphs
                    .iter()
                    .filter(|g| g.triples.iter().any(|t| {
                        t.task_id == *task
                            && t.topic_id == *topic
                            && t.relation != Relation::Dislikes
                            && t.relation != Relation::Is
                            && normalize_object(&t.object) == normalize_object(object)
                    }))
                    .map(|g| g.user_id.as_str())
                    .collect();
                prop_assert_eq!(index.support(task, topic, object), holders.len());
            }
        }
    }
}

#[test]
fn worked_examples() {
    let tax = Taxonomy::reference();
    let fitness = scopes().iter().position(|(_, t)| t == "fitness").unwrap();
    let nutrition = scopes().iter().position(|(_, t)| t == "nutrition").unwrap();
    let fact = |user, scope, relation, object: &str| Fact { user, scope, relation, object: object.into() };
    let mut facts = Vec::new();
    for u in 0..3 {
        facts.push(fact(u, fitness, Relation::Likes, "yoga"));
    }
    facts.push(fact(0, fitness, Relation::Does, "gym"));
    facts.push(fact(1, fitness, Relation::Has, "gym"));
    facts.push(fact(2, fitness, Relation::Likes, "jogging"));
    facts.push(fact(3, fitness, Relation::Likes, "jogging"));
    facts.push(fact(3, fitness, Relation::Dislikes, "running"));
    let graphs = build_graphs(&facts, 4, &tax);
    let index = CommunityIndex::rebuild(&graphs, &tax);
    let recs = recommend(&index, &graphs[3], "lifestyle", Some("fitness"), 2, &tax).unwrap();
    let got: Vec<(&str, usize)> = recs.iter().map(|r| (r.object.as_str(), r.support)).collect();
    assert_eq!(got, [("yoga", 3), ("gym", 2)]);
    assert_eq!(index.support("lifestyle", "fitness", "running"), 0);

    let facts = vec![
        fact(0, nutrition, Relation::Likes, "tea"),
        fact(1, nutrition, Relation::Likes, "tea"),
        fact(0, nutrition, Relation::Likes, "coffee"),
        fact(1, nutrition, Relation::Wants, "coffee"),
    ];
    let graphs = build_graphs(&facts, 3, &tax);
    let index = CommunityIndex::rebuild(&graphs, &tax);
    let recs = recommend(&index, &graphs[2], "lifestyle", Some("nutrition"), 2, &tax).unwrap();
    let got: Vec<&str> = recs.iter().map(|r| r.object.as_str()).collect();
    assert_eq!(got, ["coffee", "tea"]);

    assert!(recommend(&CommunityIndex::default(), &graphs[2], "lifestyle", None, 5, &tax).unwrap().is_empty());
    assert!(recommend(&index, &graphs[2], "lifestyle", Some("music"), 5, &tax).is_err());
}

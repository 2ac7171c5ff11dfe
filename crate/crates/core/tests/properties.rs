use proptest::prelude::*;
use structcot_core::metrics::{
    classification_metrics, cohen_kappa, improvement, pareto_frontier, ConfusionMatrix, ParetoPoint,
};
use structcot_core::{
    ablate, compose_prompt, parse_response, render_record, sample_dataset, Author, ColumnKind, ColumnSpec,
    DatasetSchema, FactorId, FactorSet, Feature, FeatureValue, FlowRecord, Label, PromptConfig, SampleStrategy,
    Strategy, TemplatePack, Verdict,
};

fn record(row_id: u64, label: Label) -> FlowRecord {
    FlowRecord {
        row_id,
        features: vec![
            Feature::new("src", FeatureValue::Categorical(format!("10.0.0.{row_id}"))),
            Feature::new("pktrate", FeatureValue::Numeric(row_id as f64 * 1.5)),
        ],
        label,
    }
}

fn schema() -> DatasetSchema {
    DatasetSchema::new(vec![
        ColumnSpec::new("src", ColumnKind::Categorical),
        ColumnSpec::new("pktrate", ColumnKind::Numeric),
        ColumnSpec::new("label", ColumnKind::Label),
    ])
    .unwrap()
}

fn pack() -> TemplatePack {
    let mut text = String::from("@id prop-v1\n@author manual\n\n[task]\nClassify the flow.\n");
    for s in ["free_cot", "evidence_locked_cot", "structured_security_reasoning"] {
        text.push_str(&format!("\n[strategy {s}]\nBase text for {s}.\n"));
    }
    for n in 1..=16 {
        text.push_str(&format!("\n[factor F{n}]\nFactor sentence number {n} here.\n"));
    }
    TemplatePack::parse(&text).unwrap()
}

fn records(normal: usize, attack: usize, shuffle_seed: u64) -> Vec<FlowRecord> {
    let mut labels: Vec<Label> = std::iter::repeat_n(Label::Normal, normal)
        .chain(std::iter::repeat_n(Label::Attack, attack))
        .collect();
    // Cheap deterministic interleave so classes are not contiguous.
    let n = labels.len().max(1);
    labels.rotate_left((shuffle_seed as usize) % n);
    labels.into_iter().enumerate().map(|(i, l)| record(i as u64, l)).collect()
}

proptest! {
    #[test]
    fn stratified_sample_is_balanced_and_deterministic(
        normal in 1usize..60, attack in 1usize..60, size in 1usize..80, seed: u64, rot: u64,
    ) {
        let data = records(normal, attack, rot);
        let result = sample_dataset(&data, size, seed, SampleStrategy::Stratified, "d");
        let (small, big) = (normal.min(attack), normal.max(attack));
        let feasible = size <= normal + attack && size / 2 <= small && size - size / 2 <= big;
        if !feasible {
            prop_assert!(result.is_err());
            return Ok(());
        }
        let s = result.unwrap();
        let dist = s.distribution();
        prop_assert_eq!(s.records.len(), size);
        prop_assert!(dist.normal.abs_diff(dist.attack) <= 1);
        prop_assert!(s.records.windows(2).all(|w| w[0].row_id < w[1].row_id));
        let again = sample_dataset(&data, size, seed, SampleStrategy::Stratified, "d").unwrap();
        prop_assert_eq!(again, s);
    }

    #[test]
    fn random_and_head_samples_are_subsets(n in 1usize..50, size in 1usize..50, seed: u64) {
        let data = records(n, n, 0);
        prop_assume!(size <= data.len());
        for strategy in [SampleStrategy::Random, SampleStrategy::Head] {
            let s = sample_dataset(&data, size, seed, strategy, "d").unwrap();
            prop_assert_eq!(s.records.len(), size);
            prop_assert!(s.records.iter().all(|r| data.contains(r)));
        }
    }

    #[test]
    fn kappa_is_bounded_symmetric_and_order_free(
        pairs in proptest::collection::vec((0u8..3, 0u8..3), 2..200), rot in 0usize..200,
    ) {
        let a: Vec<u8> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<u8> = pairs.iter().map(|p| p.1).collect();
        let Ok(k) = cohen_kappa(&a, &b) else {
            // Only a single shared category leaves kappa undefined.
            let mut all: Vec<u8> = a.iter().chain(&b).copied().collect();
            all.dedup();
            prop_assert!(all.windows(2).all(|w| w[0] == w[1]));
            return Ok(());
        };
        prop_assert!((-1.0..=1.0).contains(&k.kappa));
        let swapped = cohen_kappa(&b, &a).unwrap();
        prop_assert!((swapped.kappa - k.kappa).abs() < 1e-12);
        let mut rotated = pairs.clone();
        rotated.rotate_left(rot % pairs.len());
        let (ra, rb): (Vec<u8>, Vec<u8>) = rotated.into_iter().unzip();
        prop_assert!((cohen_kappa(&ra, &rb).unwrap().kappa - k.kappa).abs() < 1e-12);
        let relabel = |v: &[u8]| v.iter().map(|x| 10 - x).collect::<Vec<u8>>();
        prop_assert!((cohen_kappa(&relabel(&a), &relabel(&b)).unwrap().kappa - k.kappa).abs() < 1e-12);
    }

    #[test]
    fn chatter_does_not_move_a_compliant_verdict(
        attack: bool,
        before in proptest::collection::vec(prop_oneof![Just("Sure,"), Just("here"), Just("is"), Just("my"), Just("analysis."), Just("Thanks!"), Just("\n"), Just("🙂")], 0..30),
        after in proptest::collection::vec(prop_oneof![Just("Hope"), Just("this"), Just("helps."), Just("Let"), Just("me"), Just("know!"), Just("\n"), Just("—")], 0..30),
    ) {
        let (word, verdict) = if attack { ("ATTACK", Verdict::Attack) } else { ("NORMAL", Verdict::Normal) };
        let core = format!(
            "Observation: pktrate is 40.\nEvidence: pktrate stands out.\nConclusion: see below.\nFINAL: {word}"
        );
        let schema = schema();
        let base = parse_response(&core, &schema);
        prop_assert_eq!(base.verdict, verdict);
        let wrapped = format!("{}\n{core}\n{}", before.join(" "), after.join(" "));
        let parsed = parse_response(&wrapped, &schema);
        prop_assert_eq!(parsed.verdict, verdict);
        prop_assert_eq!(parsed.cited_features, base.cited_features);
    }

    #[test]
    fn parser_is_total(raw in proptest::collection::vec(any::<u8>(), 0..600)) {
        let text = String::from_utf8_lossy(&raw);
        let parsed = parse_response(&text, &schema());
        prop_assert_eq!(parsed.verdict == Verdict::Abstain, parsed.verdict_source == structcot_core::parser::VerdictSource::None);
    }

    #[test]
    fn ablation_is_monotone(r1 in any::<u16>(), extra in any::<u16>(), row in 0u64..1000) {
        let pack = pack();
        let full = PromptConfig::with_framework(Strategy::StructuredSecurityReasoning, Author::Manual, "prop-v1");
        let small = FactorSet::from_bits(r1);
        let large = FactorSet::from_bits(r1 | extra);
        let a = ablate(&full, small).unwrap();
        let b = ablate(&full, large).unwrap();
        prop_assert!(b.enabled_factors.is_subset(a.enabled_factors));
        let rec = record(row, Label::Attack);
        let pa = compose_prompt(&a, &rec, &pack).unwrap();
        let pb = compose_prompt(&b, &rec, &pack).unwrap();
        prop_assert!(pb.system_text.len() + pb.user_text.len() <= pa.system_text.len() + pa.user_text.len());
        for f in FactorId::ALL {
            let frag = pack.fragment(f).unwrap();
            let present = pb.system_text.contains(frag) || pb.user_text.contains(frag);
            prop_assert_eq!(present, b.enabled_factors.contains(f));
        }
    }

    #[test]
    fn ground_truth_never_reaches_the_prompt(row in 0u64..10_000, attack: bool, bits: u16) {
        let label = if attack { Label::Attack } else { Label::Normal };
        let rec = record(row, label);
        prop_assert!(!render_record(&rec).to_lowercase().contains("label"));
        let mut cfg = PromptConfig::with_framework(Strategy::StructuredSecurityReasoning, Author::Manual, "prop-v1");
        cfg.enabled_factors = FactorSet::from_bits(bits);
        let p = compose_prompt(&cfg, &rec, &pack()).unwrap();
        prop_assert!(!p.user_text.contains("label") && !p.system_text.contains("label"));
    }

    #[test]
    fn improvement_is_consistent(before in 0.01f64..1000.0, after in 0.0f64..1000.0) {
        let imp = improvement(before, after).unwrap();
        prop_assert_eq!(imp.percent > 0.0, after > before);
        prop_assert!((before * (1.0 + imp.percent / 100.0) - after).abs() <= 1e-9 * after.max(1.0));
        prop_assert!((imp.rounded() - imp.percent).abs() <= 0.05 + 1e-9);
        prop_assert_eq!(improvement(before, before).unwrap().tenths(), 0);
    }

    #[test]
    fn metrics_are_bounded(tp in 0u64..1000, tn in 0u64..1000, fp in 0u64..1000, fn_ in 0u64..1000) {
        prop_assume!(tp + tn + fp + fn_ > 0);
        let m = classification_metrics(&ConfusionMatrix { tp, tn, fp, fn_, ..Default::default() }).unwrap();
        for v in [m.accuracy, m.precision, m.recall, m.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        if m.precision > 0.0 && m.recall > 0.0 {
            prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-12 && m.f1 >= m.precision.min(m.recall) - 1e-12);
        }
    }

    #[test]
    fn frontier_is_mutually_non_dominated_and_covers_the_rest(
        pts in proptest::collection::vec((0u8..8, 0u8..8), 1..60),
    ) {
        let points: Vec<ParetoPoint> = pts.iter().enumerate()
            .map(|(i, (x, y))| ParetoPoint::new(format!("c{i}"), f64::from(*x), f64::from(*y)))
            .collect();
        let front = pareto_frontier(&points).unwrap();
        let dominates = |q: &ParetoPoint, p: &ParetoPoint| q.x >= p.x && q.y >= p.y && (q.x > p.x || q.y > p.y);
        for p in &front {
            prop_assert!(!front.iter().any(|q| dominates(q, p)));
        }
        for p in &points {
            if !front.iter().any(|f| f.condition == p.condition) {
                prop_assert!(front.iter().any(|q| dominates(q, p)));
            }
        }
        prop_assert!(front.windows(2).all(|w| w[0].x <= w[1].x));
    }
}

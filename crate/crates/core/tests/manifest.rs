use std::collections::HashSet;

use proptest::prelude::*;
use smad_core::manifest::{manifest_to_csv, parse_manifest, parse_manifest_unchecked, Violation};
use smad_core::{
    filter, merge, split_train_val, summarize, validate_manifest, Error, FilterSpec, Label,
    Manifest, ManifestEntry, Source, Tool, Variant,
};

fn entry_strategy() -> impl Strategy<Value = ManifestEntry> {
    let label = prop_oneof![Just(Label::Bonafide), Just(Label::Morph)];
    let source = prop::sample::select(Source::ALL.to_vec());
    let variant = prop::sample::select(Variant::ALL.to_vec());
    let tool = prop::sample::select(vec![
        Tool::Facefusion,
        Tool::Facemorpher,
        Tool::Opencv,
        Tool::Ubo,
        Tool::Gan,
    ]);
    (
        "[a-z0-9_-]{1,10}",
        "[a-z0-9/ ,.\"]{1,16}",
        label,
        source,
        variant,
        tool,
        prop::collection::vec("[a-z0-9]{1,5}", 2),
        0usize..3,
    )
        .prop_map(|(id, path, label, source, variant, tool, subjects, k)| {
            let (tool, subjects) = match label {
                Label::Bonafide => (Tool::None, subjects.into_iter().take(k.min(1)).collect()),
                Label::Morph if k == 0 => (tool, Vec::new()),
                Label::Morph => (tool, subjects),
            };
            ManifestEntry {
                sample_id: id,
                path,
                label,
                source,
                variant,
                tool,
                subjects,
            }
        })
}

fn manifest_strategy(max: usize) -> impl Strategy<Value = Manifest> {
    (
        prop::collection::vec(entry_strategy(), 0..max),
        prop::collection::vec("[ -~]{0,24}", 0..3),
    )
        .prop_map(|(entries, provenance)| {
            let mut seen = HashSet::new();
            let entries = entries
                .into_iter()
                .filter(|e| seen.insert(e.sample_id.clone()))
                .collect();
            Manifest::new(entries, provenance)
        })
}

/// Two entries per label at least, so every stratum can be split.
fn splittable(max: usize) -> impl Strategy<Value = Manifest> {
    manifest_strategy(max).prop_filter("both strata need two entries", |m| {
        m.count_label(Label::Bonafide) >= 2 && m.count_label(Label::Morph) >= 2
    })
}

proptest! {
    #[test]
    fn csv_round_trip_is_lossless(m in manifest_strategy(40)) {
        let text = manifest_to_csv(&m);
        let back = parse_manifest(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(manifest_to_csv(&back), text);
    }

    #[test]
    fn split_partitions_each_stratum(m in splittable(80), vf in 0.05f64..0.95, seed in any::<u64>()) {
        let (train, val) = split_train_val(&m, vf, seed).unwrap();
        prop_assert_eq!(train.len() + val.len(), m.len());
        let ids = |x: &Manifest| x.sample_ids().map(str::to_owned).collect::<HashSet<_>>();
        let (t, v) = (ids(&train), ids(&val));
        prop_assert!(t.is_disjoint(&v));
        prop_assert_eq!(t.union(&v).cloned().collect::<HashSet<_>>(), ids(&m));
        prop_assert_eq!(val.len() as f64, (vf * m.len() as f64).round());
        for &label in Label::ALL {
            let share = vf * m.count_label(label) as f64;
            let got = val.count_label(label) as f64;
            prop_assert!(got == share.floor() || got == share.ceil(), "{} of {}", got, share);
        }
        // Row order is the input order on both sides.
        let pos = |id: &str| m.entries.iter().position(|e| e.sample_id == id).unwrap();
        for side in [&train, &val] {
            let p: Vec<usize> = side.sample_ids().map(pos).collect();
            prop_assert!(p.windows(2).all(|w| w[0] < w[1]));
        }
        prop_assert_eq!(split_train_val(&m, vf, seed).unwrap(), (train, val));
    }

    #[test]
    fn split_ignores_input_row_order(m in splittable(60), seed in any::<u64>()) {
        let mut reversed = m.clone();
        reversed.entries.reverse();
        let val_ids = |x: &Manifest| {
            let (_, v) = split_train_val(x, 0.2, seed).unwrap();
            v.sample_ids().map(str::to_owned).collect::<HashSet<_>>()
        };
        prop_assert_eq!(val_ids(&m), val_ids(&reversed));
    }

    #[test]
    fn filter_keeps_exactly_the_matching_rows(
        m in manifest_strategy(60),
        sources in prop::collection::btree_set(prop::sample::select(Source::ALL.to_vec()), 1..3),
        label in prop::option::of(prop_oneof![Just(Label::Bonafide), Just(Label::Morph)]),
    ) {
        let mut spec = FilterSpec::all();
        for s in &sources {
            spec = spec.source(*s);
        }
        if let Some(l) = label {
            spec = spec.label(l);
        }
        let kept = filter(&m, &spec);
        let expected: Vec<&ManifestEntry> = m
            .entries
            .iter()
            .filter(|e| sources.contains(&e.source) && label.is_none_or(|l| e.label == l))
            .collect();
        prop_assert_eq!(kept.entries.iter().collect::<Vec<_>>(), expected);
        prop_assert!(kept.provenance.last().unwrap().contains(&spec.to_string()));
        prop_assert_eq!(filter(&m, &FilterSpec::all()).entries, m.entries.clone());
    }

    #[test]
    fn summary_counts_add_up(m in manifest_strategy(60)) {
        let s = summarize(&m);
        prop_assert_eq!(s.total(), m.len());
        prop_assert_eq!(s.bonafide_total, m.count_label(Label::Bonafide));
        prop_assert_eq!(s.counts.values().sum::<usize>(), m.len());
    }
}

#[test]
fn load_rejects_but_validate_reports_every_violation() {
    let text = "\
sample_id,path,label,source,variant,tool,subjects
a,a.png,bonafide,feret,ps300,ubo,s1
b,b.png,morph,feret,ps300,none,s1;s2
a,c.png,bonafide,feret,ps300,none,
d,d.png,morph,frgc,resized,opencv,s1
";
    assert!(matches!(parse_manifest(text), Err(Error::Schema { .. })));
    let report = validate_manifest(&parse_manifest_unchecked(text).unwrap());
    assert_eq!(report.violations.len(), 4, "{:?}", report.violations);
    assert!(report.violations.iter().any(|v| matches!(
        v,
        Violation::DuplicateSampleId {
            first_row: 1,
            second_row: 3,
            ..
        }
    )));
}

#[test]
fn merge_rejects_collisions_and_concatenates() {
    let e = |id: &str| ManifestEntry {
        sample_id: id.into(),
        path: format!("{id}.png"),
        label: Label::Bonafide,
        source: Source::Other,
        variant: Variant::Resized,
        tool: Tool::None,
        subjects: vec![],
    };
    let a = Manifest::new(vec![e("x"), e("y")], vec!["first".into()]);
    let b = Manifest::new(vec![e("z")], vec![]);
    let m = merge(&a, &b).unwrap();
    assert_eq!(m.sample_ids().collect::<Vec<_>>(), ["x", "y", "z"]);
    assert!(matches!(merge(&a, &a), Err(Error::SampleIdCollision(id)) if id == "x"));
}

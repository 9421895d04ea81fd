use proptest::prelude::*;
use qrelcmp::compare::{PairClass, PairRow};
use qrelcmp::config::ConfigFile;
use qrelcmp::llm::extract_grade;
use qrelcmp::report::{pairs_csv, Precision};
use qrelcmp::sweep::Aggregate;

proptest! {
    #[test]
    fn extracted_grades_stay_on_the_scale(text in ".{0,40}", max in 1u32..10) {
        if let Ok((g, _)) = extract_grade(&text, max) {
            prop_assert!(g <= max);
        }
    }

    #[test]
    fn in_range_answers_are_exact(g in 0u32..=3, prefix in "[a-z ]{0,10}", suffix in "[a-z .]{0,10}") {
        prop_assert_eq!(extract_grade(&format!("{prefix}{g}{suffix}"), 3).unwrap(), (g, false));
    }

    #[test]
    fn aggregate_variance_is_non_negative(xs in prop::collection::vec(prop::option::of(-1.0f64..1.0), 0..20)) {
        let a = Aggregate::of(xs.clone());
        let defined = xs.iter().flatten().count();
        prop_assert_eq!(a.defined, defined);
        prop_assert_eq!(a.mean.is_some(), defined > 0);
        if let Some(v) = a.variance {
            prop_assert!(v >= 0.0);
        }
    }

    #[test]
    fn pair_classes_count_like_confusion(flags in prop::collection::vec((any::<bool>(), any::<bool>()), 1..30)) {
        let rows: Vec<PairRow> = flags
            .iter()
            .enumerate()
            .map(|(i, &(g, c))| PairRow {
                system_a: format!("a{i}"),
                system_b: format!("b{i}"),
                mean_a_gt: 0.5,
                mean_b_gt: 0.25,
                mean_a_cand: 0.5,
                mean_b_cand: 0.25,
                p_gt: if g { 0.01 } else { 0.5 },
                p_cand: if c { 0.01 } else { 0.5 },
                sig_gt: g,
                sig_cand: c,
                class: PairClass::new(g, c),
            })
            .collect();
        let text = String::from_utf8(pairs_csv(&rows, Precision::Fixed)).unwrap();
        let fp = text.lines().filter(|l| l.ends_with(",FP")).count();
        let fn_ = text.lines().filter(|l| l.ends_with(",FN")).count();
        prop_assert_eq!(fp, flags.iter().filter(|(g, c)| !g && *c).count());
        prop_assert_eq!(fn_, flags.iter().filter(|(g, c)| *g && !c).count());
    }

    #[test]
    fn config_flag_beats_file(file_value in 1u64..1000, flag in prop::option::of(1u64..1000)) {
        let cfg = ConfigFile::parse(&format!("permutations = {file_value}\n")).unwrap();
        let got = cfg.resolve(flag, "permutations", 10_000).unwrap();
        prop_assert_eq!(got, flag.unwrap_or(file_value));
    }
}

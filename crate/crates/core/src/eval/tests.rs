use super::*;
use crate::snapshot::PageRecord;
use chrono::{NaiveDate, Utc};

fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

struct PageSpec {
    depth: u32,
    publish: Option<&'static str>,
    links: Vec<usize>,
    gold: Option<PageType>,
}

fn page_spec(depth: u32, publish: Option<&'static str>, links: Vec<usize>) -> PageSpec {
    PageSpec {
        depth,
        publish,
        links,
        gold: None,
    }
}

fn build_site(site_id: &str, specs: Vec<PageSpec>) -> SiteSnapshot {
    let urls: Vec<String> = (0..specs.len())
        .map(|i| {
            if i == 0 {
                format!("https://{site_id}.test/")
            } else {
                format!("https://{site_id}.test/p{i}")
            }
        })
        .collect();
    let pages = specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let mut p = PageRecord::new(urls[i].clone(), spec.depth, i as u32);
            p.publish_date = spec.publish.map(date);
            p.links = spec.links.iter().map(|&t| urls[t].clone()).collect();
            p.gold_type = spec.gold;
            p
        })
        .collect();
    SiteSnapshot {
        site_id: site_id.into(),
        host: format!("{site_id}.test"),
        crawl_timestamp: Utc::now(),
        page_cap: 10_000,
        review_status: None,
        pages,
    }
}

fn url_of(snapshot: &SiteSnapshot, index: usize) -> String {
    snapshot.pages[index].url.clone()
}

fn uniform_predictions(snapshot: &SiteSnapshot, label: PageType) -> BTreeMap<String, PageType> {
    snapshot
        .pages
        .iter()
        .map(|p| (p.url.clone(), label))
        .collect()
}

mod new_pages {
    use super::*;

    #[test]
    fn window_one_is_the_latest_date_only() {
        let site = build_site(
            "a",
            vec![
                page_spec(0, None, vec![]),
                page_spec(1, Some("2025-01-01"), vec![]),
                page_spec(1, Some("2025-01-02"), vec![]),
                page_spec(1, Some("2025-01-31"), vec![]),
            ],
        );
        let new = label_new_pages(&site, RecencyWindow::new(1).unwrap()).unwrap();
        assert_eq!(new.into_iter().collect::<Vec<_>>(), vec![url_of(&site, 3)]);
    }

    #[test]
    fn window_thirty_spans_back_twenty_nine_days() {
        let site = build_site(
            "a",
            vec![
                page_spec(0, None, vec![]),
                page_spec(1, Some("2025-01-01"), vec![]), // 30 days old: out
                page_spec(1, Some("2025-01-02"), vec![]), // 29 days old: in
                page_spec(1, Some("2025-01-31"), vec![]),
            ],
        );
        let new = label_new_pages(&site, RecencyWindow::new(30).unwrap()).unwrap();
        assert_eq!(
            new.into_iter().collect::<Vec<_>>(),
            vec![url_of(&site, 2), url_of(&site, 3)]
        );
    }

    #[test]
    fn a_single_dated_page_is_new_under_any_window() {
        let site = build_site(
            "a",
            vec![
                page_spec(0, None, vec![]),
                page_spec(1, Some("2024-06-01"), vec![]),
                page_spec(1, None, vec![]),
            ],
        );
        for days in [1, 30, 365] {
            let new = label_new_pages(&site, RecencyWindow::new(days).unwrap()).unwrap();
            assert_eq!(new.into_iter().collect::<Vec<_>>(), vec![url_of(&site, 1)]);
        }
    }

    #[test]
    fn undated_snapshot_has_no_latest_date() {
        let site = build_site("a", vec![page_spec(0, None, vec![])]);
        assert!(matches!(
            label_new_pages(&site, RecencyWindow::new(1).unwrap()),
            Err(EvalError::NoDatedPages)
        ));
    }
}

mod ordering {
    use super::*;

    #[test]
    fn shallow_order_sorts_by_depth_then_discovery() {
        let site = build_site(
            "a",
            vec![
                page_spec(2, None, vec![]),
                page_spec(0, None, vec![]),
                page_spec(1, None, vec![]),
            ],
        );
        assert_eq!(
            shallow_order(&site),
            vec![url_of(&site, 1), url_of(&site, 2), url_of(&site, 0)]
        );
    }

    #[test]
    fn equal_depths_break_ties_by_discovery() {
        let site = build_site(
            "a",
            vec![
                page_spec(0, None, vec![]),
                page_spec(1, None, vec![]),
                page_spec(1, None, vec![]),
            ],
        );
        assert_eq!(
            shallow_order(&site),
            vec![url_of(&site, 0), url_of(&site, 1), url_of(&site, 2)]
        );
    }

    #[test]
    fn single_page_orders_to_itself() {
        let site = build_site("a", vec![page_spec(0, None, vec![])]);
        assert_eq!(shallow_order(&site), vec![url_of(&site, 0)]);
    }
}

mod seeds {
    use super::*;

    #[test]
    fn type_filtered_takes_shallowest_index_pages() {
        let site = build_site(
            "a",
            vec![
                page_spec(0, None, vec![]),
                page_spec(1, None, vec![]),
                page_spec(1, None, vec![]),
                page_spec(2, None, vec![]),
                page_spec(3, None, vec![]),
            ],
        );
        let predictions = uniform_predictions(&site, PageType::Index);
        let sel = select_seeds(&site, &predictions, 3, SelectionMethod::TypeFiltered, "m").unwrap();
        assert_eq!(
            sel.seeds,
            vec![url_of(&site, 0), url_of(&site, 1), url_of(&site, 2)]
        );
        assert_eq!(sel.padded_count, 0);
    }

    #[test]
    fn exhausted_index_pages_pad_with_shallow_content() {
        let specs: Vec<PageSpec> = (0..20)
            .map(|i| page_spec(if i == 0 { 0 } else { 1 + (i as u32 % 3) }, None, vec![]))
            .collect();
        let site = build_site("a", specs);
        let mut predictions = uniform_predictions(&site, PageType::Content);
        predictions.insert(url_of(&site, 0), PageType::Index);
        predictions.insert(url_of(&site, 5), PageType::Index);
        let sel = select_seeds(&site, &predictions, 10, SelectionMethod::TypeFiltered, "m").unwrap();
        assert_eq!(sel.seeds.len(), 10);
        assert_eq!(sel.padded_count, 8);
        assert!(sel.seeds.contains(&url_of(&site, 0)));
        assert!(sel.seeds.contains(&url_of(&site, 5)));
        // Padding follows shallow order over content pages.
        let order = shallow_order(&site);
        let padded: Vec<&String> = sel.seeds.iter().filter(|u| predictions[*u] == PageType::Content).collect();
        let expected: Vec<&String> = order
            .iter()
            .filter(|u| predictions[*u] == PageType::Content)
            .take(8)
            .collect();
        assert_eq!(padded, expected);
    }

    #[test]
    fn hybrid_takes_ceil_half_index_then_fills_without_duplicates() {
        let specs: Vec<PageSpec> = (0..12)
            .map(|i| page_spec(if i == 0 { 0 } else { 1 }, None, vec![]))
            .collect();
        let site = build_site("a", specs);
        let mut predictions = uniform_predictions(&site, PageType::Content);
        for i in [0usize, 2, 4, 6, 8, 10] {
            predictions.insert(url_of(&site, i), PageType::Index);
        }
        let sel = select_seeds(&site, &predictions, 5, SelectionMethod::Hybrid, "m").unwrap();
        assert_eq!(sel.seeds.len(), 5);
        let index_selected: Vec<&String> = sel.seeds[..3].iter().collect();
        assert!(index_selected
            .iter()
            .all(|u| predictions[u.as_str()] == PageType::Index));
        assert_eq!(sel.padded_count, 2);
        let distinct: std::collections::HashSet<&String> = sel.seeds.iter().collect();
        assert_eq!(distinct.len(), 5);
        // Fill half is the shallowest pages regardless of type.
        assert_eq!(sel.seeds[3..], [url_of(&site, 1), url_of(&site, 3)]);
    }

    #[test]
    fn tiny_snapshots_select_every_page() {
        let site = build_site(
            "a",
            vec![page_spec(0, None, vec![]), page_spec(1, None, vec![])],
        );
        let predictions = uniform_predictions(&site, PageType::Content);
        for method in [SelectionMethod::TypeFiltered, SelectionMethod::Hybrid] {
            let sel = select_seeds(&site, &predictions, 10, method, "m").unwrap();
            assert_eq!(sel.seeds.len(), 2);
        }
    }

    #[test]
    fn invalid_budget_and_missing_predictions_error() {
        let site = build_site("a", vec![page_spec(0, None, vec![])]);
        let predictions = uniform_predictions(&site, PageType::Index);
        assert!(matches!(
            select_seeds(&site, &predictions, 0, SelectionMethod::TypeFiltered, "m"),
            Err(EvalError::InvalidBudget)
        ));
        assert!(matches!(
            select_seeds(&site, &BTreeMap::new(), 1, SelectionMethod::TypeFiltered, "m"),
            Err(EvalError::MissingPrediction(_))
        ));
    }
}

mod coverage {
    use super::*;

    fn selection(seeds: Vec<String>) -> SeedSelection {
        SeedSelection {
            method_id: "m".into(),
            budget_k: seeds.len().max(1),
            seeds,
            padded_count: 0,
        }
    }

    /// Fixpoint restatement of the coverage definition, independent of the
    /// BFS implementation.
    fn brute_force_reached(
        graph: &LinkGraph,
        seeds: &[String],
        new_pages: &BTreeSet<String>,
    ) -> usize {
        let mut reached: BTreeSet<String> = BTreeSet::new();
        loop {
            let before = reached.len();
            for page in new_pages {
                if seeds.contains(page) {
                    reached.insert(page.clone());
                }
                for seed in seeds {
                    if graph.has_edge(seed, page) {
                        reached.insert(page.clone());
                    }
                }
                let via_new = reached
                    .iter()
                    .any(|r| graph.has_edge(r, page))
                    && !reached.contains(page);
                if via_new {
                    reached.insert(page.clone());
                }
            }
            if reached.len() == before {
                break;
            }
        }
        reached.len()
    }

    #[test]
    fn chains_through_new_pages_are_fully_covered() {
        // home -> n1 -> n2 -> n3, all n* new, seed is the old home page.
        let site = build_site(
            "a",
            vec![
                page_spec(0, None, vec![1]),
                page_spec(1, Some("2025-01-31"), vec![2]),
                page_spec(2, Some("2025-01-31"), vec![3]),
                page_spec(3, Some("2025-01-31"), vec![]),
            ],
        );
        let graph = build_link_graph(&site);
        let new = label_new_pages(&site, RecencyWindow::new(1).unwrap()).unwrap();
        let row = compute_coverage(&site, &graph, &selection(vec![url_of(&site, 0)]), &new, 1)
            .unwrap();
        assert_eq!(row.new_count, 3);
        assert_eq!(row.reached_count, 3);
        assert_eq!(row.coverage, 1.0);
    }

    // Five-node graph where an old page interrupts the chain:
    // a -> n1, n1 -> o, o -> n2; new = {n1, n2}. n2 is unreachable because
    // expansion never passes through the old page o. Expected coverage
    // computed with the brute-force fixpoint oracle above.
    #[test]
    fn old_intermediaries_block_expansion() {
        let site = build_site(
            "a",
            vec![
                page_spec(0, None, vec![1]),                  // a
                page_spec(1, Some("2025-01-31"), vec![2]),    // n1
                page_spec(2, None, vec![3]),                  // o
                page_spec(3, Some("2025-01-31"), vec![]),     // n2
                page_spec(3, Some("2025-01-01"), vec![]),     // unrelated dated page
            ],
        );
        let graph = build_link_graph(&site);
        let new = label_new_pages(&site, RecencyWindow::new(1).unwrap()).unwrap();
        assert_eq!(new.len(), 2);
        let seeds = selection(vec![url_of(&site, 0)]);
        let row = compute_coverage(&site, &graph, &seeds, &new, 1).unwrap();
        let oracle = brute_force_reached(&graph, &seeds.seeds, &new);
        assert_eq!(row.reached_count, oracle);
        assert_eq!(row.coverage, 0.5);
    }

    #[test]
    fn a_new_seed_with_no_links_counts_as_reached() {
        let site = build_site(
            "a",
            vec![
                page_spec(0, None, vec![]),
                page_spec(1, Some("2025-01-31"), vec![]),
            ],
        );
        let graph = build_link_graph(&site);
        let new = label_new_pages(&site, RecencyWindow::new(1).unwrap()).unwrap();
        let row = compute_coverage(&site, &graph, &selection(vec![url_of(&site, 1)]), &new, 1)
            .unwrap();
        assert_eq!(row.coverage, 1.0);
    }

    #[test]
    fn empty_new_set_is_an_error() {
        let site = build_site("a", vec![page_spec(0, None, vec![])]);
        let graph = build_link_graph(&site);
        let err = compute_coverage(&site, &graph, &selection(vec![]), &BTreeSet::new(), 1)
            .unwrap_err();
        assert!(matches!(err, EvalError::NoNewPages));
    }
}

mod metrics {
    use super::*;

    // All-pages predictions over a site with 1,964 index pages in 10,000.
    #[test]
    fn all_index_predictions_have_perfect_recall() {
        let mut gold = BTreeMap::new();
        let mut predicted = BTreeMap::new();
        for i in 0..10_000 {
            let url = format!("https://ex.test/p{i}");
            let label = if i < 1_964 {
                PageType::Index
            } else {
                PageType::Content
            };
            gold.insert(url.clone(), label);
            predicted.insert(url, PageType::Index);
        }
        let row = classification_metrics("space", &gold, &predicted).unwrap();
        assert!((row.precision - 0.1964).abs() < 1e-12);
        assert_eq!(row.recall, 1.0);
        assert!((row.f1 - 2.0 * 0.1964 / 1.1964).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_score_one() {
        let gold: BTreeMap<String, PageType> = [
            ("a".to_string(), PageType::Index),
            ("b".to_string(), PageType::Content),
        ]
        .into_iter()
        .collect();
        let row = classification_metrics("s", &gold, &gold.clone()).unwrap();
        assert_eq!((row.precision, row.recall, row.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn zero_predicted_index_scores_zero() {
        let gold: BTreeMap<String, PageType> = [
            ("a".to_string(), PageType::Index),
            ("b".to_string(), PageType::Content),
        ]
        .into_iter()
        .collect();
        let predicted: BTreeMap<String, PageType> =
            gold.keys().map(|k| (k.clone(), PageType::Content)).collect();
        let row = classification_metrics("s", &gold, &predicted).unwrap();
        assert_eq!((row.precision, row.recall, row.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn key_mismatch_is_an_error() {
        let gold: BTreeMap<String, PageType> =
            [("a".to_string(), PageType::Index)].into_iter().collect();
        let predicted: BTreeMap<String, PageType> =
            [("b".to_string(), PageType::Index)].into_iter().collect();
        assert!(matches!(
            classification_metrics("s", &gold, &predicted),
            Err(EvalError::KeyMismatch(_))
        ));
    }
}

mod averaging {
    use super::*;
    use super::super::report::fmt3;

    fn row(site: &str, p: f64, r: f64, f1: f64) -> MetricsRow {
        MetricsRow {
            site_id: site.into(),
            precision: p,
            recall: r,
            f1,
        }
    }

    #[test]
    fn precision_macro_average_over_three_sites() {
        let rows = [
            row("a", 0.3721, 1.0, 0.0),
            row("b", 0.3911, 1.0, 0.0),
            row("c", 0.1964, 1.0, 0.0),
        ];
        let avg = macro_average_metrics(&rows).unwrap();
        assert!((avg.precision - 0.31986666666).abs() < 1e-9);
        assert_eq!(fmt3(avg.precision), "0.320");
        assert_eq!(avg.recall, 1.0);
    }

    // Per-site F1 derived independently: with recall 1, f1 = 2p / (p + 1).
    #[test]
    fn f1_macro_average_from_derived_per_site_values() {
        let precisions = [0.3721, 0.3911, 0.1964];
        let f1s: Vec<f64> = precisions.iter().map(|p| 2.0 * p / (p + 1.0)).collect();
        assert!((f1s[0] - 0.5424).abs() < 5e-5);
        assert!((f1s[1] - 0.5623).abs() < 5e-5);
        assert!((f1s[2] - 0.3283).abs() < 5e-5);
        let rows: Vec<MetricsRow> = precisions
            .iter()
            .zip(&f1s)
            .map(|(p, f)| row("s", *p, 1.0, *f))
            .collect();
        let avg = macro_average_metrics(&rows).unwrap();
        assert!((avg.f1 - 0.47766).abs() < 5e-5);
        assert_eq!(fmt3(avg.f1), "0.478");
    }

    #[test]
    fn single_row_averages_to_itself() {
        let rows = [row("a", 0.25, 0.5, 0.3333)];
        let avg = macro_average_metrics(&rows).unwrap();
        assert_eq!((avg.precision, avg.recall, avg.f1), (0.25, 0.5, 0.3333));
    }

    #[test]
    fn identical_rows_average_to_that_row() {
        let rows = vec![row("a", 0.7, 0.8, 0.746); 5];
        let avg = macro_average_metrics(&rows).unwrap();
        assert_eq!((avg.precision, avg.recall, avg.f1), (0.7, 0.8, 0.746));
    }

    #[test]
    fn empty_average_is_an_error() {
        assert!(matches!(
            macro_average_metrics(&[]),
            Err(EvalError::EmptyAverage)
        ));
    }
}

mod experiment {
    use super::*;

    fn labeled_site(site_id: &str) -> SiteSnapshot {
        let mut site = build_site(
            site_id,
            vec![
                page_spec(0, None, vec![1, 2, 3]),
                page_spec(1, Some("2025-01-31"), vec![]),
                page_spec(1, Some("2025-01-10"), vec![]),
                page_spec(1, Some("2024-11-01"), vec![]),
            ],
        );
        for (i, page) in site.pages.iter_mut().enumerate() {
            let gold = if i == 0 {
                PageType::Index
            } else {
                PageType::Content
            };
            page.gold_type = Some(gold);
            page.predictions.insert("m".into(), gold);
        }
        site
    }

    fn grid() -> (Vec<EvalMethod>, Vec<RecencyWindow>, Vec<usize>) {
        (
            vec![EvalMethod::parse("m").unwrap()],
            vec![RecencyWindow::new(1).unwrap(), RecencyWindow::new(30).unwrap()],
            vec![1, 2, 3, 4, 5],
        )
    }

    #[test]
    fn grid_cardinality() {
        let sites = vec![labeled_site("a"), labeled_site("b"), labeled_site("c")];
        let (methods, windows, budgets) = grid();
        let report = run_experiment(&sites, &methods, &windows, &budgets);
        assert_eq!(report.coverage.len(), 30, "3 sites x 2 windows x 5 budgets");
        assert_eq!(report.metrics.len(), 3);
        assert_eq!(report.metric_averages.len(), 1);
        assert_eq!(report.cells.len(), 10);
        assert_eq!(report.method_averages.len(), 1);
        assert!(report.method_averages[0].1.is_some());
        assert!(report.missing.is_empty());
    }

    #[test]
    fn unlabeled_sites_get_coverage_but_no_metrics() {
        let mut noisy = labeled_site("noisy");
        for page in noisy.pages.iter_mut() {
            page.gold_type = None;
        }
        let sites = vec![labeled_site("a"), noisy];
        let (methods, windows, budgets) = grid();
        let report = run_experiment(&sites, &methods, &windows, &budgets);
        assert_eq!(report.metrics.len(), 1, "only the labeled site");
        assert_eq!(report.coverage.len(), 20, "both sites");
    }

    #[test]
    fn methods_without_predictions_are_reported_missing() {
        let sites = vec![labeled_site("a")];
        let methods = vec![
            EvalMethod::parse("m").unwrap(),
            EvalMethod::parse("absent").unwrap(),
        ];
        let (_, windows, budgets) = grid();
        let report = run_experiment(&sites, &methods, &windows, &budgets);
        assert_eq!(report.missing.len(), 1);
        assert_eq!(report.missing[0].method_id, "absent");
        assert_eq!(report.coverage.len(), 10, "the good method still ran");
    }

    #[test]
    fn reruns_are_byte_identical() {
        let sites = vec![labeled_site("a"), labeled_site("b")];
        let (methods, windows, budgets) = grid();
        let one = run_experiment(&sites, &methods, &windows, &budgets);
        let two = run_experiment(&sites, &methods, &windows, &budgets);
        assert_eq!(one, two);
        assert_eq!(one.metrics_csv(), two.metrics_csv());
        assert_eq!(one.coverage_csv(), two.coverage_csv());
        assert_eq!(one.tables_markdown(), two.tables_markdown());
    }

    #[test]
    fn gold_and_hybrid_methods_parse() {
        let gold = EvalMethod::parse("gold").unwrap();
        assert_eq!(gold.source, PredictionSource::Gold);
        assert_eq!(gold.selection, SelectionMethod::TypeFiltered);
        let hybrid = EvalMethod::parse("hybrid:llm:gpt-4o:title").unwrap();
        assert_eq!(
            hybrid.source,
            PredictionSource::Classifier("llm:gpt-4o:title".into())
        );
        assert_eq!(hybrid.selection, SelectionMethod::Hybrid);
        assert!(EvalMethod::parse("").is_err());
        assert!(EvalMethod::parse("hybrid:").is_err());
    }
}

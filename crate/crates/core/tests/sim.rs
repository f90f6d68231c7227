//! Simulator behaviour against closed-form and Monte-Carlo oracles.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wholepage::dml::PanelDataset;
use wholepage::domain::{validate_layout, BrandId, ContentKind, PageLayout, TemplateId};
use wholepage::sim::*;

fn small_config(seed: u64) -> WorldConfig {
    WorldConfig { seed, n_customers: 500, n_queries: 40, n_zips: 10, ..WorldConfig::default() }
}

/// The organic layout of a request with every item set to `appeal` and
/// moved off the query brand, so no brand boost applies.
fn flat_organic_layout(world: &World, appeal: f64) -> (Request, PageLayout) {
    let request = draw_request(world, 7, 0);
    let mut layout = candidate_layouts(world, &request)
        .into_iter()
        .find(|l| l.template_id == TemplateId(0))
        .expect("organic template is always eligible");
    let off_brand = BrandId(layout.query_brand.0 + 1);
    for slot in &mut layout.slots {
        slot.item.base_appeal = appeal;
        slot.item.brand = off_brand;
    }
    (request, layout)
}

#[test]
fn same_seed_same_world() {
    let a = generate_world(&small_config(3)).unwrap();
    assert_eq!(a, generate_world(&small_config(3)).unwrap());
    assert_ne!(a, generate_world(&small_config(4)).unwrap());
}

#[test]
fn zero_scales_give_zero_fixed_effects() {
    let config = WorldConfig { fixed_effect_scales: [0.0, 0.0], ..small_config(1) };
    let world = generate_world(&config).unwrap();
    assert!(world.queries.iter().all(|q| q.alpha == 0.0));
    assert!(world.zips.iter().all(|z| z.zeta == 0.0));
}

#[test]
fn propensity_tracks_history() {
    let config = WorldConfig { n_customers: 10_000, ..WorldConfig::default() };
    let world = generate_world(&config).unwrap();
    let u: Vec<f64> = world.customers.iter().map(|c| c.propensity).collect();
    let h: Vec<f64> = world.customers.iter().map(|c| c.history[0]).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mu, mh) = (mean(&u), mean(&h));
    let cov: f64 = u.iter().zip(&h).map(|(a, b)| (a - mu) * (b - mh)).sum();
    let var = |v: &[f64], m: f64| v.iter().map(|a| (a - m).powi(2)).sum::<f64>();
    let corr = cov / (var(&u, mu) * var(&h, mh)).sqrt();
    assert!(corr > 0.3, "corr {corr}");
}

#[test]
fn vanishing_decay_examines_only_the_first_slot() {
    let config = WorldConfig { position_bias_decay: 1e-12, ..small_config(2) };
    let world = generate_world(&config).unwrap();
    let (request, layout) = flat_organic_layout(&world, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..2_000 {
        let out = simulate_session(&world, request.customer(&world), request.query_group(&world), &layout, &mut rng);
        assert!(out.clicks[0]);
        assert!(out.clicks[1..].iter().all(|&c| !c));
    }
}

#[test]
fn zero_appeal_means_no_engagement() {
    let world = generate_world(&small_config(5)).unwrap();
    let (request, layout) = flat_organic_layout(&world, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..2_000 {
        let out = simulate_session(&world, request.customer(&world), request.query_group(&world), &layout, &mut rng);
        assert!(out.clicks.iter().all(|&c| !c));
        assert!(!out.non_abandonment);
        assert_eq!(out.short_term_revenue, 0.0);
    }
}

#[test]
fn position_bias_ratio_matches_decay() {
    let world = generate_world(&small_config(6)).unwrap();
    let (request, layout) = flat_organic_layout(&world, 0.5);
    assert!(layout.slots[..8].iter().all(|s| s.kind == ContentKind::Organic));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut first, mut eighth) = (0u32, 0u32);
    for _ in 0..100_000 {
        let out = simulate_session(&world, request.customer(&world), request.query_group(&world), &layout, &mut rng);
        first += u32::from(out.clicks[0]);
        eighth += u32::from(out.clicks[7]);
    }
    let ratio = f64::from(first) / f64::from(eighth);
    let expected = world.config.position_bias_decay.powi(-7);
    assert!((ratio / expected - 1.0).abs() < 0.10, "ratio {ratio} vs {expected}");
}

fn silent_config() -> WorldConfig {
    WorldConfig {
        true_region_effects: [0.0; 3],
        short_term_carry: 0.0,
        engagement_carry: 0.0,
        baseline_long_term: 0.0,
        propensity_carry: 0.0,
        history_effects: vec![0.0; 3],
        fixed_effect_scales: [0.0, 0.0],
        noise_scale: 0.0,
        ..small_config(8)
    }
}

#[test]
fn zero_coefficients_give_zero_long_term_revenue() {
    let world = generate_world(&silent_config()).unwrap();
    for event in simulate_randomized(&world, 0, 200, 0).unwrap() {
        assert_eq!(event.long_term.unwrap().long_term_revenue, 0.0);
    }
}

#[test]
fn full_top_beats_full_bottom_by_the_top_effect() {
    let config = WorldConfig { noise_scale: 0.0, true_region_effects: [1.0, 0.6, 0.0], ..small_config(9) };
    let world = generate_world(&config).unwrap();
    let event = &simulate_randomized(&world, 0, 1, 0).unwrap()[0];
    let (customer, query) = (event.request.customer(&world), event.request.query_group(&world));
    let session = event.session.as_ref().unwrap();
    let top = welfare(&world, customer, query, [1.0, 0.0, 0.0], session);
    let bottom = welfare(&world, customer, query, [0.0, 0.0, 1.0], session);
    assert!((top - bottom - 1.0).abs() < 1e-12, "difference {}", top - bottom);
}

#[test]
fn long_term_revenue_rises_with_top_match_rate() {
    let world = generate_world(&small_config(10)).unwrap();
    let mut total = 0.0;
    for event in simulate_randomized(&world, 0, 10_000, 0).unwrap() {
        let id = event.request.event_id;
        let (customer, query) = (event.request.customer(&world), event.request.query_group(&world));
        let session = event.session.as_ref().unwrap();
        let draw = |layout: &PageLayout| {
            let mut rng = ChaCha8Rng::seed_from_u64(id);
            realize_long_term(&world, customer, query, layout, session, &mut rng).unwrap().long_term_revenue
        };
        let mut matched = event.layout.clone();
        for slot in matched.slots.iter_mut().filter(|s| s.position <= 8) {
            slot.item.brand = matched.query_brand;
        }
        let (low, high) = (draw(&event.layout), draw(&matched));
        assert!(high >= low);
        total += high - low;
    }
    assert!(total > 0.0);
}

#[test]
fn single_event_panel_row() {
    let world = generate_world(&small_config(11)).unwrap();
    let events = simulate_randomized(&world, 0, 1, 0).unwrap();
    let panel = emit_panel(&world, &events).unwrap();
    assert_eq!(panel.len(), 1);
    let bmrs = wholepage::metrics::BrandMatchPage::from_layout(&events[0].layout).unwrap().region_bmrs();
    assert_eq!(panel.records[0].surrogates, bmrs.to_vec());
    assert_eq!(panel.records[0].drev, events[0].long_term.unwrap().long_term_revenue);
}

#[test]
fn panel_column_count() {
    let world = generate_world(&small_config(12)).unwrap();
    let panel = emit_panel(&world, &simulate_randomized(&world, 0, 5, 0).unwrap()).unwrap();
    let mut csv = Vec::new();
    panel.write_csv(&mut csv).unwrap();
    let header = String::from_utf8(csv).unwrap().lines().next().unwrap().to_string();
    let keys = 4;
    assert_eq!(header.split(',').count(), 1 + 3 + 2 + world.config.history_dim + keys);
}

#[test]
fn simulated_panel_csv_round_trip() {
    let world = generate_world(&small_config(13)).unwrap();
    let panel = emit_panel(&world, &simulate_randomized(&world, 0, 300, 0).unwrap()).unwrap();
    let mut csv = Vec::new();
    panel.write_csv(&mut csv).unwrap();
    let back = PanelDataset::read_csv(csv.as_slice()).unwrap();
    assert_eq!(back, panel);
    for (a, b) in back.records.iter().zip(&panel.records) {
        assert_eq!(a.drev.to_bits(), b.drev.to_bits());
    }
}

#[test]
fn missing_outcome_names_the_event() {
    let world = generate_world(&small_config(14)).unwrap();
    let mut events = simulate_randomized(&world, 40, 3, 0).unwrap();
    events[1].long_term = None;
    let err = emit_panel(&world, &events).unwrap_err().to_string();
    assert!(err.contains("41"), "{err}");
}

#[test]
fn candidates_share_stock_and_respect_templates() {
    let world = generate_world(&small_config(15)).unwrap();
    for id in 0..200 {
        let request = draw_request(&world, id, 0);
        let candidates = candidate_layouts(&world, &request);
        assert!(candidates.iter().any(|l| l.template_id == TemplateId(0)));
        for layout in &candidates {
            let template = &world.templates[layout.template_id.0 as usize];
            assert_eq!(validate_layout(layout, template), Ok(()));
        }
        assert_eq!(candidates, candidate_layouts(&world, &request));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn session_bookkeeping(seed in 0u64..10_000) {
        let world = generate_world(&small_config(16)).unwrap();
        let event = &simulate_randomized(&world, seed, 1, 0).unwrap()[0];
        let s = event.session.as_ref().unwrap();
        prop_assert_eq!(s.clicks.len(), event.layout.slots.len());
        prop_assert_eq!(s.short_term_revenue, s.purchases.iter().sum::<f64>());
        prop_assert!(s.purchases.iter().zip(&s.clicks).all(|(p, c)| *p == 0.0 || *c));
        prop_assert_eq!(s.engagement_a, s.clicks.iter().filter(|&&c| c).count() as f64);
        prop_assert_eq!(s.non_abandonment, s.clicks.iter().any(|&c| c));
        prop_assert!(event.long_term.unwrap().long_term_revenue >= 0.0);
    }
}

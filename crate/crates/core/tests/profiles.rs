use cablecap::profiles::{generate_campaign, min_pairwise_distance, CampaignSpec};
use cablecap::PowerProfile;

fn spec(seed: u64, pool: usize) -> CampaignSpec {
    CampaignSpec {
        profile_count: 60,
        total_power_mw: 20.0,
        pool_factor: pool,
        seed,
        ..CampaignSpec::default()
    }
}

fn profiles(spec: &CampaignSpec) -> Vec<PowerProfile> {
    generate_campaign(spec).unwrap().into_iter().map(|(p, _)| p).collect()
}

#[test]
fn candidate_pool_improves_coverage() {
    let (mut with_pool, mut without) = (0.0, 0.0);
    for seed in 0..10 {
        with_pool += min_pairwise_distance(&profiles(&spec(seed, 8)));
        without += min_pairwise_distance(&profiles(&spec(seed, 1)));
    }
    assert!(with_pool >= without, "{with_pool} < {without}");
}

#[test]
fn campaign_is_deterministic() {
    let s = spec(4, 8);
    assert_eq!(generate_campaign(&s).unwrap(), generate_campaign(&s).unwrap());
    let other = spec(5, 8);
    assert_ne!(generate_campaign(&s).unwrap(), generate_campaign(&other).unwrap());
}

#[test]
fn campaign_profiles_are_exact() {
    let s = spec(1, 8);
    for (p, f) in generate_campaign(&s).unwrap() {
        assert!((p.excursion_db() - f).abs() <= 1e-9);
        assert!((p.total_mw() - s.total_power_mw).abs() <= 1e-9 * s.total_power_mw);
    }
}

use platoon_core::config::{PolicyKind, SimConfig};
use platoon_core::harness::{self, Agents};
use platoon_harness::checkpoint::{self, Checkpoint, MAGIC};
use platoon_harness::HarnessError;
use proptest::prelude::*;

fn tiny() -> SimConfig {
    SimConfig { duration: 90.0, calibration_episodes: 1, observe: 4, batch_size: 4, ..SimConfig::desk() }
}

fn trained() -> (SimConfig, Agents) {
    let cfg = tiny();
    let mut agents = Agents::new(&cfg).unwrap();
    harness::calibrate(&cfg, &mut agents).unwrap();
    harness::train_episode(&cfg, &mut agents).unwrap();
    (cfg, agents)
}

fn bits(xs: &[f64]) -> Vec<u64> {
    xs.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn layout_is_magic_header_then_floats() {
    let (cfg, agents) = trained();
    let bytes = Checkpoint::capture(&cfg, &agents).encode().unwrap();
    assert_eq!(&bytes[..8], MAGIC);
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header: serde_json::Value = serde_json::from_slice(&bytes[16..16 + n]).unwrap();
    let floats: u64 = header["arrays"].as_array().unwrap().iter().map(|a| a["len"].as_u64().unwrap()).sum();
    assert_eq!(bytes.len() as u64, 16 + n as u64 + 8 * floats);
    assert_eq!(header["arrays"][0]["name"], "formation.params");
    assert_eq!(header["arrays"][0]["len"].as_u64().unwrap() as usize, agents.formation.net.param_count());
    let first = f64::from_le_bytes(bytes[16 + n..24 + n].try_into().unwrap());
    assert_eq!(first.to_bits(), agents.formation.net.params[0].to_bits());
}

#[test]
fn round_trip_is_bit_exact() {
    let (cfg, agents) = trained();
    let bytes = Checkpoint::capture(&cfg, &agents).encode().unwrap();
    let restored = Checkpoint::decode(&bytes).unwrap().restore(&cfg).unwrap();
    for (a, b) in [(&agents.formation, &restored.formation), (&agents.coordination, &restored.coordination)] {
        assert_eq!(bits(&a.net.params), bits(&b.net.params));
        assert_eq!(bits(&a.target), bits(&b.target));
        assert_eq!(bits(&a.adam.m), bits(&b.adam.m));
        assert_eq!(bits(&a.adam.v), bits(&b.adam.v));
        assert_eq!((a.adam.t, a.decisions, a.grad_steps), (b.adam.t, b.decisions, b.grad_steps));
    }
    assert_eq!(agents.normalizer, restored.normalizer);
    assert_eq!(agents.episodes, restored.episodes);
    assert_eq!(Checkpoint::capture(&cfg, &restored).encode().unwrap(), bytes);
}

#[test]
fn restored_agents_act_identically() {
    let (cfg, agents) = trained();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.ckpt");
    checkpoint::save(&path, &cfg, &agents).unwrap();
    let restored = checkpoint::load(&path, &cfg).unwrap();
    for policy in [PolicyKind::CoorPlt, PolicyKind::Fp] {
        let c = SimConfig { policy, ..cfg.clone() };
        assert_eq!(harness::evaluate_episode(&c, Some(&agents), 0).unwrap(), harness::evaluate_episode(&c, Some(&restored), 0).unwrap());
    }
}

#[test]
fn damaged_files_are_rejected() {
    let (cfg, agents) = trained();
    let bytes = Checkpoint::capture(&cfg, &agents).encode().unwrap();
    for bad in [&bytes[..bytes.len() - 3], &bytes[..12], b"not a checkpoint at all"] {
        assert!(matches!(Checkpoint::decode(bad), Err(HarnessError::Checkpoint(_))));
    }
    let mut longer = bytes.clone();
    longer.push(0);
    assert!(Checkpoint::decode(&longer).is_err());
}

#[test]
fn other_granularity_is_rejected() {
    let (cfg, agents) = trained();
    let ckpt = Checkpoint::capture(&cfg, &agents);
    let other = SimConfig { granularity: 6, ..cfg };
    let err = ckpt.restore(&other).unwrap_err();
    assert!(err.to_string().contains("granularity 12"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn any_float_bits_survive(raw in prop::collection::vec(any::<u64>(), 6)) {
        let cfg = SimConfig::desk();
        let mut ckpt = Checkpoint::capture(&cfg, &Agents::new(&cfg).unwrap());
        let values: Vec<f64> = raw.iter().map(|b| f64::from_bits(*b)).collect();
        ckpt.arrays.insert("normalizer".into(), values.clone());
        let p = ckpt.arrays.get_mut("coordination.params").unwrap();
        p[..6].copy_from_slice(&values);
        let back = Checkpoint::decode(&ckpt.encode().unwrap()).unwrap();
        prop_assert_eq!(bits(&back.arrays["normalizer"]), raw.clone());
        prop_assert_eq!(bits(&back.arrays["coordination.params"][..6]), raw);
        prop_assert_eq!(back.header, ckpt.header);
    }
}

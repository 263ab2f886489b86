#![no_main]

use fmcw_mend::config::Config;
use fmcw_mend::synth::Scene;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = Config::parse(text) else { return };
    let _ = cfg.radar();
    let _ = cfg.mp();
    let _ = cfg.cpi();
    if let Ok(sc) = cfg.scenario() {
        let small_scene = match &sc.scene {
            Scene::Point(t) => t.len() <= 64,
            Scene::Extended(e) => e.n_scatterers <= 64,
        };
        if sc.radar.n_samples <= 1 << 14 && small_scene {
            let _ = fmcw_mend::synth::build_scenario(&sc);
        }
    }
    let _ = cfg.study();
});

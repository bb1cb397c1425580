//! Link budget of a single small-cell PRB, then one simulated day of the
//! network under three fixed sleep policies.

use fedsleep::radio::{
    noise_power_w, path_loss_db, prb_rate_bps, sinr, Environment, ScenarioConfig,
};

fn main() -> fedsleep::Result<()> {
    for d in [50.0, 500.0, 1500.0] {
        let pl = path_loss_db(d)?;
        let signal = 4.0 * 10f64.powf(-pl / 10.0);
        let s = sinr(signal, &[], noise_power_w(-174.0, 180e3));
        println!(
            "d = {d:>6.0} m  loss = {pl:6.2} dB  SINR = {:8.1} dB  PRB rate = {:5.2} Mbps",
            10.0 * s.log10(),
            prb_rate_bps(180e3, s) / 1e6
        );
    }

    let cfg = ScenarioConfig {
        n_sbs: 8,
        ues_per_sbs: [4, 4],
        ttis_per_day: 240,
        seed: 1,
        ..Default::default()
    };
    let policies: [(&str, fn(f64) -> usize); 4] = [
        ("always active", |_| 0),
        ("always light sleep", |_| 1),
        ("always deep sleep", |_| 2),
        ("deep sleep below 4 Mbps", |load| if load < 4.0 { 2 } else { 0 }),
    ];
    for (name, policy) in policies {
        let mut env = Environment::new(cfg.clone())?;
        let (mut thr, mut pow, mut rew, mut drop) = (0.0, 0.0, 0.0, 0.0);
        let ttis = cfg.ttis_per_day as usize;
        for _ in 0..ttis {
            let actions: Vec<usize> = (0..cfg.n_sbs)
                .map(|n| policy(env.observe_raw(n)[1]))
                .collect();
            let out = env.step(&actions)?;
            thr += out.total_throughput_bps() / 1e6;
            pow += out.total_power_w();
            drop += out.mean_drop_rate();
            rew += (0..cfg.n_sbs).map(|n| env.reward(n, &out)).sum::<f64>() / cfg.n_sbs as f64;
        }
        let t = ttis as f64;
        println!(
            "{name:<26} throughput {:6.2} Mbps  power {:6.1} W  EE {:.4} Mbps/W  drop {:.3}  reward {:+.3}",
            thr / t,
            pow / t,
            thr / pow,
            drop / t,
            rew / t
        );
    }
    Ok(())
}

use walker_core::domrand::{PhysicsOverrides, StepPerturbation};
use walker_core::env::{CommandVector, MorphologyConfig, SimConfig, WalkerSim};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let cfg = SimConfig { reset_noise: 0.0, ..SimConfig::default() };
    let mut sim = WalkerSim::new(MorphologyConfig::planar_walker(), cfg).unwrap();
    sim.reset(PhysicsOverrides::nominal(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let dof = sim.morphology().dof_total();
    let m = sim.morphology().clone();
    let kk = m.gait_rate;
    let scale = m.action_scale;
    for i in 0..120 {
        let s = sim.state();
        let t = sim.time();
        let fb = (0.8 * s.pitch + 0.25 * s.pitch_rate) / scale;
        let mut a = vec![0.0; dof];
        for leg in 0..2 {
            let off = m.limb_joint_offset(leg);
            let dir = (2.0 * std::f64::consts::PI * (kk * t + m.limb(leg).phase_offset)).sin();
            let swing = dir.max(0.0);
            let stance = if dir <= 0.0 { 1.0 } else { 0.0 };
            a[off] = (0.30 * dir) / scale + fb * stance;
            a[off + 1] = (-0.55 * swing) / scale;
            a[off + 2] = 0.4 * fb * stance;
        }
        sim.step(&a, CommandVector::forward(0.5), &StepPerturbation::none(dof)).unwrap();
        if i % 4 == 0 {
            let s = sim.state();
            let kin = sim.kinematics();
            let fl = kin[0].tip(); let fr = kin[1].tip();
            println!("i={i:3} t={:4.2} x={:+.3} vx={:+.3} z={:.3} pitch={:+.3} | L: q=({:+.2},{:+.2}) foot=({:+.3},{:+.3}) c={} | R: q=({:+.2},{:+.2}) foot=({:+.3},{:+.3}) c={}",
                sim.time(), s.x, s.vx, s.z, s.pitch,
                s.q[0], s.q[1], fl.0 - s.x, fl.1, s.feet[0].contact as u8,
                s.q[3], s.q[4], fr.0 - s.x, fr.1, s.feet[1].contact as u8);
        }
        if sim.is_fallen() { println!("FELL at {i}"); break; }
    }
}

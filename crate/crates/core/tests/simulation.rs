use satsim::config::{LifetimeLaw, ScenarioConfig, SpawnRegion};
use satsim::phd::{Particle, ParticlePhd};
use satsim::sim::{simulate, write_events_csv, EventRow, Mode, Simulation};
use satsim::world::{admissible_controls_within, Position};

/// One target born at the centre at step 1, a clean sensor, and `agents` agents.
fn scripted(agents: usize, lifetime: f64) -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    c.agents = agents;
    c.horizon = 40;
    c.sensor.clutter_rate = 0.0;
    c.sensor.pd_max = 1.0;
    c.targets.count = 1;
    c.targets.spawn = SpawnRegion::Center;
    c.targets.birth_first = 1;
    c.targets.birth_last = 1;
    c.targets.lifetime = LifetimeLaw::Fixed;
    c.targets.mean_lifetime = lifetime;
    c.validate().unwrap();
    c
}

fn events_of(sim: &Simulation, agent: usize) -> Vec<&EventRow> {
    sim.record().events.iter().filter(|e| e.agent_id == agent).collect()
}

#[test]
fn searching_agent_switches_to_tracking_when_a_target_enters_its_square() {
    let c = scripted(1, 100.0);
    let mut sim = Simulation::new(&c, 3).unwrap();
    let centre = Position::new(50.0, 50.0);
    sim.place_agent(0, centre);
    assert_eq!(sim.agents()[0].mode, Mode::Searching);
    sim.step().unwrap();
    assert_eq!(sim.agents()[0].mode, Mode::Tracking);
    let first = events_of(&sim, 0)[0];
    assert_eq!((first.step, first.mode, first.tag.as_str()), (1, Mode::Tracking, "detect"));
    assert_eq!(first.n_hat, 1);
}

#[test]
fn agent_stays_searching_while_its_square_is_empty() {
    let c = scripted(1, 100.0);
    let mut sim = Simulation::new(&c, 3).unwrap();
    sim.place_agent(0, Position::new(5.0, 5.0));
    sim.step().unwrap();
    assert_eq!(sim.agents()[0].mode, Mode::Searching);
    assert!(!events_of(&sim, 0)[0].tag.contains("detect"));
}

#[test]
fn tracking_agent_returns_to_searching_after_its_target_dies() {
    let c = scripted(1, 8.0);
    let mut sim = Simulation::new(&c, 5).unwrap();
    sim.place_agent(0, Position::new(50.0, 50.0));
    for _ in 0..c.horizon {
        sim.step().unwrap();
    }
    let last_alive = sim.record().truth.iter().filter(|t| t.alive).map(|t| t.step).max().unwrap();
    assert_eq!(last_alive, 8);
    let events = events_of(&sim, 0);
    // Tracking the whole lifetime, then H_lost empty steps, then back to search.
    assert!(events[..last_alive].iter().all(|e| e.mode == Mode::Tracking && e.n_hat == 1));
    let lost: Vec<usize> = events.iter().filter(|e| e.tag.contains("lost")).map(|e| e.step).collect();
    assert_eq!(lost.first().copied(), Some(last_alive + c.tracking.lost_steps));
    let after = &events[last_alive + c.tracking.lost_steps - 1];
    assert_eq!(after.mode, Mode::Searching);
    for e in &events[last_alive..last_alive + c.tracking.lost_steps - 1] {
        assert_eq!((e.mode, e.n_hat), (Mode::Tracking, 0));
    }
}

#[test]
fn two_agents_tracking_the_same_target_resolve_the_overlap() {
    let mut c = scripted(2, 100.0);
    // A precise sensor so both agents hold practically identical estimates.
    c.sensor.range_noise_intercept = 0.02;
    c.sensor.range_noise_slope = 0.0;
    c.sensor.bearing_noise_intercept = 0.002;
    c.sensor.bearing_noise_slope = 0.0;
    c.motion.noise_scale = 0.05;
    c.validate().unwrap();

    let mut sim = Simulation::new(&c, 9).unwrap();
    sim.step().unwrap();
    let truth = sim.world().alive().next().unwrap().state;
    let motion = c.motion.model().unwrap();
    for i in 0..2 {
        let particles = (0..1000).map(|_| Particle::new(truth, 1e-3)).collect();
        let mut phd = ParticlePhd::with_particles(c.phd, particles);
        phd.propagate_survivors(&motion, &mut satsim::sim::rng_stream(99, i as u64));
        sim.place_agent(i, truth.position());
        sim.begin_tracking(i, phd);
    }
    for _ in 0..c.overlap.window {
        sim.step().unwrap();
    }
    let releases: Vec<&EventRow> = sim.record().events.iter().filter(|e| e.tag.contains("release")).collect();
    assert_eq!(releases.len(), 1, "exactly one agent must give up the shared target");
    assert_eq!(releases[0].step, 1 + c.overlap.window);
    let modes: Vec<Mode> = sim.agents().iter().map(|a| a.mode).collect();
    assert!(modes.contains(&Mode::Tracking) && modes.contains(&Mode::Searching), "{modes:?}");
}

#[test]
fn identical_seed_gives_identical_event_logs() {
    let mut c = ScenarioConfig::default();
    c.horizon = 30;
    c.targets.count = 6;
    let log = |seed| {
        let r = simulate(&c, seed).unwrap();
        let mut buf = Vec::new();
        write_events_csv(&r.events, &mut buf).unwrap();
        buf
    };
    assert_eq!(log(21), log(21));
    assert_ne!(log(21), log(22));
}

#[test]
fn agents_stay_in_the_area_and_only_apply_admissible_controls() {
    let mut c = ScenarioConfig::default();
    c.horizon = 60;
    c.agents = 5;
    c.targets.count = 8;
    c.targets.birth_last = 30;
    let mut sim = Simulation::new(&c, 31).unwrap();
    let area = c.area();
    let mut previous: Vec<Position> = sim.agents().iter().map(|a| a.position).collect();
    for _ in 0..c.horizon {
        sim.step().unwrap();
        for (a, prev) in sim.agents().iter().zip(&mut previous) {
            assert!(area.contains(&a.position), "agent {} left the area at {:?}", a.id, a.position);
            let allowed = admissible_controls_within(*prev, &c.control, &area);
            assert!(
                allowed.iter().any(|u| u.distance(&a.position) < 1e-9),
                "agent {} moved from {prev:?} to {:?}",
                a.id,
                a.position
            );
            *prev = a.position;
        }
    }
}

#[test]
fn every_mode_change_is_logged_with_its_trigger() {
    let mut c = ScenarioConfig::default();
    c.horizon = 80;
    c.agents = 4;
    c.targets.count = 10;
    let record = simulate(&c, 8).unwrap();
    let mut changes = 0;
    for agent in 0..c.agents {
        let rows: Vec<&EventRow> = record.events.iter().filter(|e| e.agent_id == agent).collect();
        assert_eq!(rows.len(), c.horizon);
        let mut mode = Mode::Searching;
        for r in rows {
            if r.mode != mode {
                changes += 1;
                match r.mode {
                    Mode::Tracking => assert!(r.tag.contains("detect"), "step {}: {}", r.step, r.tag),
                    Mode::Searching => assert!(
                        r.tag.contains("lost") || r.tag.contains("release"),
                        "step {}: {}",
                        r.step,
                        r.tag
                    ),
                }
                mode = r.mode;
            }
        }
    }
    assert!(changes > 0, "the scenario should exercise mode changes");
}

#[test]
fn search_only_scenarios_never_track() {
    let mut c = ScenarioConfig::default();
    c.horizon = 40;
    c.tracking.enabled = false;
    c.targets.count = 10;
    let record = simulate(&c, 4).unwrap();
    assert!(record.events.iter().all(|e| e.mode == Mode::Searching && e.n_hat == 0));
    assert!(record.steps.iter().all(|s| s.estimates.is_empty()));
}

#[test]
fn searched_fraction_is_monotone_without_decay() {
    let mut c = ScenarioConfig::default();
    c.horizon = 60;
    c.tracking.enabled = false;
    c.search.decay = 1.0;
    let record = simulate(&c, 2).unwrap();
    let s: Vec<f64> = record.steps.iter().map(|s| s.searched).collect();
    assert!(s.windows(2).all(|w| w[1] >= w[0]), "{s:?}");
    assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
}

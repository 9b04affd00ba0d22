mod common;

use proptest::prelude::*;

use evac_core::dynamics::{agent_repulsion, integrate, World};
use evac_core::emotion::{contagion_rate, update_panic, EmotionIncrement};
use evac_core::io::{parse_scenario, serialize_scenario};
use evac_core::model::{Hazard, ParamKey, Range, SpawnGroup};
use evac_core::physiology::update_strength;
use evac_core::spatial::{build_grid, compute_nav_field};
use evac_core::{spawn_agents, AgentState, ModelParams, Rect, ScenarioSpec, Segment, Vec2};

fn agent(id: usize, x: f64, y: f64, vx: f64, vy: f64, radius: f64) -> AgentState {
    AgentState {
        id,
        pos: Vec2::new(x, y),
        vel: Vec2::new(vx, vy),
        radius,
        mass: 80.0,
        v_pref: 1.4,
        strength: 5000.0,
        panic: 0.0,
        exited: false,
    }
}

proptest! {
    #[test]
    fn panic_stays_in_unit_interval(
        e in 0.0..=1.0f64,
        c in 0.0..50.0f64,
        h in 0.0..50.0f64,
        jl in 0.0..50.0f64,
        delta in 0.0..10.0f64,
        dt in 1e-4..3.0f64,
    ) {
        let mut p = ModelParams::default();
        p.delta_decay = delta;
        let inc = EmotionIncrement::new(c, h, jl, e, &p);
        let out = update_panic(e, &inc, dt);
        prop_assert!((0.0..=1.0).contains(&out));
    }

    #[test]
    fn strength_stays_in_capacity_and_balances(
        frac in 0.0..=1.0f64,
        power in 0.0..1e5f64,
        speed in 0.0..5.0f64,
        r_rec in 0.0..1e4f64,
        dt in 1e-4..2.0f64,
    ) {
        let mut p = ModelParams::default();
        p.r_rec = r_rec;
        let s = frac * p.s_max;
        let u = update_strength(s, power, speed, dt, &p);
        prop_assert!((0.0..=p.s_max).contains(&u.strength));
        prop_assert!(u.consumed >= 0.0 && u.recovered >= 0.0);
        let residual = s - u.strength - u.consumed + u.recovered;
        prop_assert!(residual.abs() <= 1e-9 * p.s_max, "residual {residual}");
    }

    #[test]
    fn repulsion_normal_parts_are_opposite(
        x in -3.0..3.0f64, y in -3.0..3.0f64,
        vx in -2.0..2.0f64, vy in -2.0..2.0f64,
        ra in 0.15..0.35f64, rb in 0.15..0.35f64,
    ) {
        prop_assume!(x.hypot(y) > 1e-3);
        let p = ModelParams::default();
        let a = agent(0, 0.0, 0.0, 0.0, 0.0, ra);
        let b = agent(1, x, y, vx, vy, rb);
        let n = (a.pos - b.pos).normalized_or_zero();
        let fa = agent_repulsion(&a, &b, &p).dot(n);
        let fb = agent_repulsion(&b, &a, &p).dot(n);
        prop_assert!((fa + fb).abs() <= 1e-9 * fa.abs().max(1.0));
    }

    #[test]
    fn repulsion_fades_with_distance_beyond_contact(
        d1 in 0.5..3.0f64, extra in 1e-3..1.0f64,
    ) {
        let p = ModelParams::default();
        let a = agent(0, 0.0, 0.0, 0.0, 0.0, 0.25);
        let near = agent(1, d1, 0.0, 0.0, 0.0, 0.25);
        let far = agent(1, d1 + extra, 0.0, 0.0, 0.0, 0.25);
        prop_assert!(agent_repulsion(&a, &far, &p).length() <= agent_repulsion(&a, &near, &p).length());
    }

    #[test]
    fn grid_query_equals_brute_force(
        pts in prop::collection::vec((0.0..30.0f64, 0.0..30.0f64), 1..120),
        qx in -2.0..32.0f64, qy in -2.0..32.0f64,
        radius in 0.0..6.0f64,
        cell in 0.3..4.0f64,
    ) {
        let agents: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y))| agent(i, x, y, 0.0, 0.0, 0.2)).collect();
        let grid = build_grid(&agents, cell);
        let q = Vec2::new(qx, qy);
        let got: Vec<usize> = grid.query_neighbors(q, radius, None).into_iter().map(|(i, _)| i).collect();
        let want: Vec<usize> = agents.iter().filter(|a| a.pos.distance(q) <= radius).map(|a| a.id).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn contagion_is_monotone_in_neighbor_panic(
        me in 0.0..=1.0f64,
        others in prop::collection::vec((0.0..=1.0f64, 0.0..2.0f64), 1..10),
        which in any::<prop::sample::Index>(),
        bump in 0.0..1.0f64,
    ) {
        let p = ModelParams::default();
        let before = contagion_rate(me, others.iter().copied(), &p);
        let mut raised = others.clone();
        let k = which.index(raised.len());
        raised[k].0 = (raised[k].0 + bump).min(1.0);
        let after = contagion_rate(me, raised.iter().copied(), &p);
        prop_assert!(after >= before);
    }

    #[test]
    fn integration_respects_hard_cap_and_domain(
        x in 0.0..10.0f64, y in 0.0..10.0f64,
        vx in -6.0..6.0f64, vy in -6.0..6.0f64,
        fx in -1e5..1e5f64, fy in -1e5..1e5f64,
        dt in 1e-3..0.2f64,
    ) {
        let p = ModelParams::default();
        let mut spec = ScenarioSpec::room(10.0, 10.0);
        spec.obstacles.push(Rect::new(4.0, 4.0, 2.0, 2.0));
        let world = World::from_spec(&spec);
        let a = agent(0, x, y, vx, vy, 0.25);
        let (pos, vel) = integrate(&a, Vec2::new(fx, fy), dt, &p, &world).unwrap();
        prop_assert!(vel.length() <= p.v_hard + 1e-9);
        prop_assert!(pos.x >= 0.25 - 1e-9 && pos.x <= 10.0 - 0.25 + 1e-9);
        prop_assert!(pos.y >= 0.25 - 1e-9 && pos.y <= 10.0 - 0.25 + 1e-9);
        prop_assert!(!spec.obstacles[0].contains_open(pos));
    }
}

/// Random room with a few obstacles and one exit on the east wall.
fn obstacle_scene() -> impl Strategy<Value = ScenarioSpec> {
    (
        prop::collection::vec((1.0..8.0f64, 0.0..8.0f64, 0.3..2.0f64, 0.3..3.0f64), 0..4),
        1.0..8.0f64,
    )
        .prop_map(|(obs, ey)| {
            let mut spec = ScenarioSpec::room(10.0, 10.0);
            spec.domain.cell_size = 0.5;
            spec.exits.push(Segment::new(Vec2::new(10.0, ey), Vec2::new(10.0, ey + 1.0)));
            spec.obstacles = obs.into_iter().map(|(x, y, w, h)| Rect::new(x, y, w, h)).collect();
            spec
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nav_distances_satisfy_bellman(spec in obstacle_scene()) {
        let nav = compute_nav_field(&spec).unwrap();
        let (nx, ny) = nav.dims();
        let h = nav.cell_size();
        for j in 0..ny {
            for i in 0..nx {
                let d = nav.dist_at(i, j);
                if nav.is_blocked(i, j) || !d.is_finite() {
                    continue;
                }
                if nav.is_exit(i, j) {
                    prop_assert_eq!(d, 0.0);
                    continue;
                }
                let mut best = f64::INFINITY;
                for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        let (a, b) = (i as i64 + di, j as i64 + dj);
                        if (di, dj) == (0, 0) || a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                            continue;
                        }
                        let (a, b) = (a as usize, b as usize);
                        if nav.is_blocked(a, b) {
                            continue;
                        }
                        let step = if di != 0 && dj != 0 { h * std::f64::consts::SQRT_2 } else { h };
                        best = best.min(nav.dist_at(a, b) + step);
                    }
                }
                prop_assert!((d - best).abs() <= 1e-9, "cell ({i},{j}): {d} vs {best}");
            }
        }
    }

    #[test]
    fn following_nav_directions_reaches_an_exit(spec in obstacle_scene()) {
        let nav = compute_nav_field(&spec).unwrap();
        let (nx, ny) = nav.dims();
        for j in 0..ny {
            for i in 0..nx {
                if nav.is_blocked(i, j) || !nav.dist_at(i, j).is_finite() {
                    continue;
                }
                let (mut a, mut b) = (i, j);
                let mut steps = 0;
                while !nav.is_exit(a, b) {
                    let d = nav.dir_at(a, b);
                    let next = nav.cell_of(nav.cell_center(a, b) + d * nav.cell_size() * std::f64::consts::SQRT_2);
                    prop_assert!(nav.dist_at(next.0, next.1) < nav.dist_at(a, b));
                    (a, b) = next;
                    steps += 1;
                    prop_assert!(steps <= nx * ny);
                }
            }
        }
    }
}

fn range() -> impl Strategy<Value = Range> {
    (0.1..5.0f64, 0.0..2.0f64).prop_map(|(lo, w)| Range::new(lo, lo + w))
}

fn any_spec() -> impl Strategy<Value = ScenarioSpec> {
    (
        (5.0..50.0f64, 5.0..50.0f64, 0.1..1.0f64),
        (1e-3..0.2f64, 1.0..500.0f64, any::<u64>(), 1u64..100),
        prop::collection::vec((0.0..20.0f64, 0.0..20.0f64, 0.1..5.0f64, 0.1..5.0f64), 0..3),
        prop::collection::vec((0.0..20.0f64, 0.0..20.0f64, 0.0..20.0f64, 0.0..20.0f64), 1..3),
        prop::collection::vec((0.0..20.0f64, 0.0..20.0f64, prop::option::of(0.0..3.0f64), prop::option::of(0.1..5.0f64)), 0..3),
        prop::collection::vec((0usize..500, range(), range(), range()), 0..3),
        prop::collection::btree_map(prop::sample::select(ParamKey::ALL.to_vec()), 0.01..100.0f64, 0..5),
    )
        .prop_map(|(dom, sim, obs, exits, hazards, groups, params)| {
            let mut spec = ScenarioSpec::room(dom.0, dom.1);
            spec.domain.cell_size = dom.2;
            spec.sim.dt = sim.0;
            spec.sim.max_time = sim.1;
            spec.sim.seed = sim.2;
            spec.sim.output_every = sim.3;
            spec.obstacles = obs.into_iter().map(|(x, y, w, h)| Rect::new(x, y, w, h)).collect();
            spec.exits = exits
                .into_iter()
                .map(|(a, b, c, d)| Segment::new(Vec2::new(a, b), Vec2::new(c, d)))
                .collect();
            spec.hazards = hazards
                .into_iter()
                .map(|(x, y, a_h, lambda_h)| Hazard { pos: Vec2::new(x, y), a_h, lambda_h })
                .collect();
            spec.groups = groups
                .into_iter()
                .map(|(n, v, m, r)| {
                    let mut g = SpawnGroup::new(n, Rect::new(1.0, 1.0, 3.0, 3.0));
                    g.v_pref = v;
                    g.mass = m;
                    g.radius = r;
                    g
                })
                .collect();
            spec.params = params;
            spec
        })
}

proptest! {
    #[test]
    fn scenario_text_round_trips(spec in any_spec()) {
        let text = serialize_scenario(&spec);
        let back = parse_scenario(&text).unwrap();
        prop_assert_eq!(back, spec);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn spawning_is_deterministic_and_non_overlapping(seed in any::<u64>(), n in 1usize..60) {
        let spec = common::obstacle_room(n, seed);
        let a = spawn_agents(&spec, seed).unwrap();
        let b = spawn_agents(&spec, seed).unwrap();
        prop_assert_eq!(&a, &b);
        for (i, x) in a.iter().enumerate() {
            prop_assert!(spec.groups[0].rect.contains_closed(x.pos));
            prop_assert!(spec.obstacles.iter().all(|o| o.signed_distance(x.pos).0 >= x.radius - 1e-9));
            for y in &a[i + 1..] {
                prop_assert!(x.pos.distance(y.pos) >= x.radius + y.radius - 1e-9);
            }
        }
    }
}

mod common;

use amaze_core::env::{run_episode, run_episode_traced, trace_to_jsonl, ConstantPolicy, PathFollower, RandomPolicy};
use amaze_core::rng::Pcg32;
use amaze_core::{Cell, Direction, Env, EnvError, Maze, MazeSpec, RewardParams, StepEvent};
use common::{flood, golden, random_specs};

fn golden_maze() -> Maze {
    Maze::generate(&"M0_10x10_C1_t.5_T.5".parse::<MazeSpec>().unwrap()).unwrap()
}

#[test]
fn optimal_episode_identities() {
    for spec in random_specs(500, 20) {
        let maze = Maze::generate(&spec).unwrap();
        let l = maze.path_len();
        let r = run_episode(&mut PathFollower::default(), &maze, &RewardParams::raw(l), 100 * l as u32);
        assert!(r.success);
        assert_eq!(r.raw_return, l as f64, "{}", spec.descriptor());
        assert!((r.normalized_return - 1.0).abs() < 1e-9);
        assert_eq!((r.collisions, r.backward_steps), (0, 0));
        assert!(r.is_optimal(&maze));
    }
}

#[test]
fn raw_goal_step_for_ten_cell_path() {
    // Goal step under the raw preset: (2l - 1) - 1.
    let params = RewardParams::raw(10);
    assert_eq!(params.reward(StepEvent::Goal), 18.0);
    assert_eq!(params.reward(StepEvent::Collision), -1.1);
    assert_eq!(params.reward(StepEvent::Backward), -1.2);
    let norm = RewardParams::normalized(10);
    assert!((norm.reward(StepEvent::Goal) - (2.0 - 1.0 / 9.0)).abs() < 1e-15);
}

#[test]
fn collisions_keep_position_and_previous_cell() {
    let maze = golden_maze();
    let start = maze.start();
    let wall = Direction::ALL.into_iter().find(|&d| maze.has_wall(start, d)).unwrap();
    let mut env = Env::new(&maze, RewardParams::raw(maze.path_len()));
    let first = env.reset();
    assert_eq!(first, env.reset());
    let step = env.step(wall).unwrap();
    assert_eq!(step.event, StepEvent::Collision);
    assert!((step.reward + 1.1).abs() < 1e-12);
    assert_eq!(env.state().pos, start);
    assert_eq!(env.state().prev, None);
}

#[test]
fn backward_move_and_finished_episode() {
    let maze = golden_maze();
    let p = maze.optimal_path().to_vec();
    let mut env = Env::new(&maze, RewardParams::raw(maze.path_len()));
    env.reset();
    let fwd = p[0].direction_to(p[1]).unwrap();
    assert_eq!(env.step(fwd).unwrap().event, StepEvent::Move);
    assert_eq!(env.state().prev, Some(p[0]));
    let back = env.step(fwd.opposite()).unwrap();
    assert_eq!(back.event, StepEvent::Backward);
    assert!((back.reward + 1.2).abs() < 1e-12);
    assert_eq!(env.state().pos, p[0]);

    let mut env = Env::new(&maze, RewardParams::raw(maze.path_len()));
    env.reset();
    for w in p.windows(2) {
        env.step(w[0].direction_to(w[1]).unwrap()).unwrap();
    }
    assert!(env.state().done);
    assert!(matches!(env.step(Direction::East), Err(EnvError::EpisodeFinished)));
}

#[test]
fn step_cap_truncates() {
    let maze = golden_maze();
    let wall = Direction::ALL.into_iter().find(|&d| maze.has_wall(maze.start(), d)).unwrap();
    let r = run_episode(&mut ConstantPolicy(wall), &maze, &RewardParams::raw(maze.path_len()), 17);
    assert!(!r.success);
    assert_eq!((r.steps, r.collisions), (17, 17));
}

#[test]
fn golden_reset_observation() {
    let maze = golden_maze();
    let mut env = Env::new(&maze, RewardParams::normalized(maze.path_len()));
    let obs = env.reset();
    assert_eq!(obs, amaze_core::observe_discrete(&maze, maze.start(), None));
    golden("reset_observation.json", serde_json::to_string(&obs).unwrap().as_bytes());
}

#[test]
fn golden_random_trajectory() {
    let maze = golden_maze();
    let params = RewardParams::raw(maze.path_len());
    let (result, trace) = run_episode_traced(&mut RandomPolicy::new(0), &maze, &params, 200);
    assert_eq!(trace.len() as u32, result.steps);
    let (again, _) = run_episode_traced(&mut RandomPolicy::new(0), &maze, &params, 200);
    assert_eq!(result, again);
    golden("random_policy_trace.jsonl", trace_to_jsonl(&trace).as_bytes());
}

/// Drives raw and normalized environments in lockstep with a noisy
/// goal-seeking walker and checks that both presets agree on optimality.
#[test]
fn optimality_is_preset_independent() {
    for (n, spec) in random_specs(100, 21).into_iter().enumerate() {
        let maze = Maze::generate(&spec).unwrap();
        let l = maze.path_len();
        let to_goal = flood(&maze, maze.goal());
        let w = maze.width();
        let mut rng = Pcg32::new(n as u64, 3);
        for noise in [0.0, 0.05, 0.2, 0.5] {
            let mut raw = Env::new(&maze, RewardParams::raw(l)).with_max_steps(50 * l as u32);
            let mut norm = Env::new(&maze, RewardParams::normalized(l)).with_max_steps(50 * l as u32);
            raw.reset();
            norm.reset();
            let (mut r, mut rbar) = (0.0, 0.0);
            let mut cells: Vec<Cell> = vec![maze.start()];
            loop {
                let pos = raw.state().pos;
                let action = if rng.unit() < noise {
                    Direction::from_index(rng.below(4) as usize)
                } else {
                    Direction::ALL
                        .into_iter()
                        .filter(|&d| !maze.has_wall(pos, d))
                        .min_by_key(|&d| {
                            let c = maze.neighbor(pos, d).unwrap();
                            to_goal[(c.y * w + c.x) as usize].unwrap()
                        })
                        .unwrap()
                };
                let (a, b) = (raw.step(action).unwrap(), norm.step(action).unwrap());
                assert_eq!(a.event, b.event);
                r += a.reward;
                rbar += b.reward;
                if a.event != StepEvent::Collision {
                    cells.push(raw.state().pos);
                }
                if a.done() {
                    break;
                }
            }
            let optimal = cells == maze.optimal_path() && raw.state().steps as usize == l - 1;
            assert_eq!(optimal, (rbar - 1.0).abs() < 1e-9, "{} noise {noise}", spec.descriptor());
            assert_eq!(optimal, r == l as f64);
            if noise == 0.0 {
                assert!(optimal);
            }
        }
    }
}

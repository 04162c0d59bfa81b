//! Builders for the three bundled benchmark environments.
//!
//! All three are episodic. The bias example and the cliff walk are
//! undiscounted (`gamma = 1`); both terminate with probability one under any
//! policy with positive exploration, which is what licenses the
//! value-iteration oracle on them.

use crate::estimators::DistributionSpec;
use crate::mdp::{MdpError, Outcome, StateId, TabularMdp};

/// Bias-example state ids.
pub const BIAS_STATE_A: StateId = 0;
pub const BIAS_STATE_B: StateId = 1;
/// Action ids in state A.
pub const BIAS_ACTION_LEFT: usize = 0;
pub const BIAS_ACTION_RIGHT: usize = 1;

/// Grid actions, shared by the grid world and the cliff walk.
pub const GRID_NORTH: usize = 0;
pub const GRID_SOUTH: usize = 1;
pub const GRID_EAST: usize = 2;
pub const GRID_WEST: usize = 3;

fn constant(value: f64) -> DistributionSpec {
    DistributionSpec::Constant { value }
}

/// Two-state task exposing the maximization bias. Start A has actions
/// {left, right}: right ends the episode with reward 0; left moves to B with
/// reward 0. Each of the `k_b_actions` actions in B ends the episode with a
/// Gaussian N(-0.1, 1) reward, so every trajectory through left is worth
/// -0.1 while right is worth 0. Undiscounted.
pub fn make_bias_example(k_b_actions: usize) -> TabularMdp {
    assert!(k_b_actions >= 1, "state B needs at least one action");
    let terminal: StateId = 2;
    let a_row = vec![
        // left -> B
        vec![Outcome { next_state: BIAS_STATE_B, prob: 1.0, reward: constant(0.0) }],
        // right -> terminal
        vec![Outcome { next_state: terminal, prob: 1.0, reward: constant(0.0) }],
    ];
    let b_row = (0..k_b_actions)
        .map(|_| {
            vec![Outcome {
                next_state: terminal,
                prob: 1.0,
                reward: DistributionSpec::Gaussian { mean: -0.1, std: 1.0 },
            }]
        })
        .collect();
    let outcomes = vec![a_row, b_row, Vec::new()];
    TabularMdp::new_proper_episodic(outcomes, vec![false, false, true], BIAS_STATE_A)
        .expect("bias example is a valid MDP")
}

/// n x n grid with start in the southwest corner and goal in the northeast.
/// Moves off the grid leave the state unchanged. Every non-terminating step
/// pays a uniform(reward_lo, reward_hi) reward; any action taken in the goal
/// state pays +5 and ends the episode.
pub fn make_grid_world(
    n: usize,
    reward_lo: f64,
    reward_hi: f64,
    gamma: f64,
) -> Result<TabularMdp, MdpError> {
    assert!(n >= 2, "grid needs at least 2x2 cells");
    if reward_lo > reward_hi {
        return Err(MdpError::InvalidReward(format!(
            "uniform interval inverted: lo {reward_lo} > hi {reward_hi}"
        )));
    }
    let step_reward = DistributionSpec::Uniform { lo: reward_lo, hi: reward_hi };
    // row 0 is the south edge; cell (row, col) -> row * n + col
    let cell = |row: usize, col: usize| row * n + col;
    let goal = cell(n - 1, n - 1);
    let terminal = n * n;
    let n_states = n * n + 1;

    let mut outcomes = vec![Vec::new(); n_states];
    for row in 0..n {
        for col in 0..n {
            let s = cell(row, col);
            let mut rows = Vec::with_capacity(4);
            for action in [GRID_NORTH, GRID_SOUTH, GRID_EAST, GRID_WEST] {
                if s == goal {
                    rows.push(vec![Outcome {
                        next_state: terminal,
                        prob: 1.0,
                        reward: constant(5.0),
                    }]);
                    continue;
                }
                let (nr, nc) = match action {
                    GRID_NORTH if row + 1 < n => (row + 1, col),
                    GRID_SOUTH if row > 0 => (row - 1, col),
                    GRID_EAST if col + 1 < n => (row, col + 1),
                    GRID_WEST if col > 0 => (row, col - 1),
                    _ => (row, col),
                };
                rows.push(vec![Outcome {
                    next_state: cell(nr, nc),
                    prob: 1.0,
                    reward: step_reward,
                }]);
            }
            outcomes[s] = rows;
        }
    }
    let mut terminal_flags = vec![false; n_states];
    terminal_flags[terminal] = true;
    TabularMdp::new(outcomes, terminal_flags, gamma, cell(0, 0))
}

/// Undiscounted cliff walk on a `height x width` grid. Start bottom-left,
/// goal bottom-right, cliff along the bottom row strictly between them.
/// Every transition costs -1 except stepping into the cliff, which costs
/// -100 and teleports back to the start without ending the episode.
pub fn make_cliff_walk(height: usize, width: usize) -> TabularMdp {
    assert!(height >= 2, "cliff walk needs height >= 2");
    assert!(width >= 3, "cliff walk needs width >= 3");
    // cliff cells are never occupied, so they are excluded from the state
    // space entirely; map surviving (row, col) cells to dense ids
    let is_cliff = |row: usize, col: usize| row == 0 && col > 0 && col < width - 1;
    let mut id_of = vec![vec![usize::MAX; width]; height];
    let mut next_id = 0;
    for row in 0..height {
        for col in 0..width {
            if !is_cliff(row, col) {
                id_of[row][col] = next_id;
                next_id += 1;
            }
        }
    }
    let start = id_of[0][0];
    let goal = id_of[0][width - 1];
    let n_states = next_id;

    let mut outcomes = vec![Vec::new(); n_states];
    for row in 0..height {
        for col in 0..width {
            if is_cliff(row, col) || id_of[row][col] == goal {
                continue;
            }
            let s = id_of[row][col];
            let mut rows = Vec::with_capacity(4);
            for action in [GRID_NORTH, GRID_SOUTH, GRID_EAST, GRID_WEST] {
                let (nr, nc) = match action {
                    GRID_NORTH if row + 1 < height => (row + 1, col),
                    GRID_SOUTH if row > 0 => (row - 1, col),
                    GRID_EAST if col + 1 < width => (row, col + 1),
                    GRID_WEST if col > 0 => (row, col - 1),
                    _ => (row, col),
                };
                let outcome = if is_cliff(nr, nc) {
                    Outcome { next_state: start, prob: 1.0, reward: constant(-100.0) }
                } else {
                    Outcome { next_state: id_of[nr][nc], prob: 1.0, reward: constant(-1.0) }
                };
                rows.push(vec![outcome]);
            }
            outcomes[s] = rows;
        }
    }
    let mut terminal_flags = vec![false; n_states];
    terminal_flags[goal] = true;
    TabularMdp::new_proper_episodic(outcomes, terminal_flags, start)
        .expect("cliff walk is a valid MDP")
}

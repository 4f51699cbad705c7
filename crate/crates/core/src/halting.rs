//! Toy programs encoded as infinite coin systems.
//!
//! A program that halts at exactly step `k` becomes the system whose stack
//! `k` holds false coins (weight `1+γ`); every other stack is true. Weights
//! are produced lazily: asking for `q(i)` simulates the program for at most
//! `i` steps, so a device observing the first `N` stacks never runs the
//! program past step `N`. A halting step beyond the observed horizon stays
//! invisible and is reported as such.

use serde::{Deserialize, Serialize};

use crate::coin::{self, DeviceConfig};
use crate::error::{Error, Result};
use crate::growth;
use crate::mc::{self, TrialRng};
use crate::wiener::{self, TimeScale, WienerBound};

pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000;
pub const MAX_REGISTERS: usize = 4;

/// One counter-machine instruction. Registers are indexed from 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Instruction {
    Inc(usize),
    /// Decrement, saturating at zero.
    Dec(usize),
    /// Jump to `target` when register `reg` is zero.
    Jz { reg: usize, target: usize },
    Jmp(usize),
    Halt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProgramKind {
    /// Halts at exactly step `k`.
    BoundedLoop { k: u64 },
    Diverge,
    /// Runs `instructions` from pc 0; halts on `Halt` or on leaving the
    /// program.
    CounterMachine {
        #[serde(default)]
        registers: Vec<u64>,
        instructions: Vec<Instruction>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyProgram {
    #[serde(flatten)]
    pub kind: ProgramKind,
    #[serde(default = "default_budget")]
    pub step_budget: u64,
}

fn default_budget() -> u64 {
    DEFAULT_STEP_BUDGET
}

impl ToyProgram {
    pub fn bounded_loop(k: u64) -> Result<Self> {
        Self::new(ProgramKind::BoundedLoop { k })
    }

    pub fn diverge() -> Self {
        ToyProgram {
            kind: ProgramKind::Diverge,
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }

    pub fn counter_machine(registers: Vec<u64>, instructions: Vec<Instruction>) -> Result<Self> {
        Self::new(ProgramKind::CounterMachine {
            registers,
            instructions,
        })
    }

    pub fn new(kind: ProgramKind) -> Result<Self> {
        let p = ToyProgram {
            kind,
            step_budget: DEFAULT_STEP_BUDGET,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.step_budget = budget;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            ProgramKind::BoundedLoop { k } if *k == 0 => {
                Err(Error::config("bounded-loop needs k >= 1"))
            }
            ProgramKind::CounterMachine {
                registers,
                instructions,
            } => {
                if registers.len() > MAX_REGISTERS {
                    return Err(Error::config(format!(
                        "at most {MAX_REGISTERS} registers, got {}",
                        registers.len()
                    )));
                }
                for (pc, ins) in instructions.iter().enumerate() {
                    let (reg, target) = match *ins {
                        Instruction::Inc(r) | Instruction::Dec(r) => (Some(r), None),
                        Instruction::Jz { reg, target } => (Some(reg), Some(target)),
                        Instruction::Jmp(t) => (None, Some(t)),
                        Instruction::Halt => (None, None),
                    };
                    if reg.is_some_and(|r| r >= MAX_REGISTERS) {
                        return Err(Error::config(format!("instruction {pc}: register out of range")));
                    }
                    if target.is_some_and(|t| t > instructions.len()) {
                        return Err(Error::config(format!("instruction {pc}: jump target out of range")));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn start(&self) -> Machine {
        let mut regs = [0u64; MAX_REGISTERS];
        if let ProgramKind::CounterMachine { registers, .. } = &self.kind {
            for (r, v) in regs.iter_mut().zip(registers) {
                *r = *v;
            }
        }
        Machine {
            pc: 0,
            regs,
            steps: 0,
            halted_at: None,
        }
    }
}

/// Execution state. Stepping a halted machine is a no-op.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Machine {
    pc: usize,
    regs: [u64; MAX_REGISTERS],
    steps: u64,
    halted_at: Option<u64>,
}

impl Machine {
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn halted_at(&self) -> Option<u64> {
        self.halted_at
    }

    pub fn registers(&self) -> &[u64; MAX_REGISTERS] {
        &self.regs
    }

    /// Execute one step of `program`.
    pub fn step(&mut self, program: &ToyProgram) {
        if self.halted_at.is_some() {
            return;
        }
        self.steps += 1;
        let halt = match &program.kind {
            ProgramKind::BoundedLoop { k } => self.steps == *k,
            ProgramKind::Diverge => false,
            ProgramKind::CounterMachine { instructions, .. } => match instructions.get(self.pc) {
                None | Some(Instruction::Halt) => true,
                Some(&ins) => {
                    self.pc = match ins {
                        Instruction::Inc(r) => {
                            self.regs[r] = self.regs[r].saturating_add(1);
                            self.pc + 1
                        }
                        Instruction::Dec(r) => {
                            self.regs[r] = self.regs[r].saturating_sub(1);
                            self.pc + 1
                        }
                        Instruction::Jz { reg, target } if self.regs[reg] == 0 => target,
                        Instruction::Jz { .. } => self.pc + 1,
                        Instruction::Jmp(t) => t,
                        Instruction::Halt => unreachable!(),
                    };
                    false
                }
            },
        };
        if halt {
            self.halted_at = Some(self.steps);
        }
    }
}

/// Halting step found by plain simulation for at most `max_steps` steps.
pub fn simulate(program: &ToyProgram, max_steps: u64) -> Option<u64> {
    let mut m = program.start();
    while m.halted_at.is_none() && m.steps < max_steps {
        m.step(program);
    }
    m.halted_at
}

/// Lazily simulated weight sequence `q(i) = 1+γ` iff the program halts at
/// exactly step `i`.
#[derive(Debug, Clone)]
pub struct LazyWeights {
    program: ToyProgram,
    gamma: f64,
    machine: Machine,
}

pub fn weights_for(program: &ToyProgram, gamma: f64) -> Result<LazyWeights> {
    program.validate()?;
    coin::check_gamma(gamma)?;
    Ok(LazyWeights {
        program: program.clone(),
        gamma,
        machine: program.start(),
    })
}

impl LazyWeights {
    /// Steps simulated so far.
    pub fn steps_simulated(&self) -> u64 {
        self.machine.steps
    }

    fn advance_to(&mut self, i: u64) -> Result<()> {
        if i > self.program.step_budget {
            return Err(Error::BudgetExceeded {
                requested: i,
                budget: self.program.step_budget,
            });
        }
        while self.machine.halted_at.is_none() && self.machine.steps < i {
            self.machine.step(&self.program);
        }
        Ok(())
    }

    /// `q(i)`, `i >= 1`.
    pub fn q(&mut self, i: u64) -> Result<f64> {
        if i == 0 {
            return Err(Error::IndexError { index: 0, len: 0 });
        }
        self.advance_to(i)?;
        Ok(if self.machine.halted_at == Some(i) {
            1.0 + self.gamma
        } else {
            coin::BASE_WEIGHT
        })
    }

    /// `q(1..=n)`.
    pub fn prefix(&mut self, n: usize) -> Result<Vec<f64>> {
        self.advance_to(n as u64)?;
        (1..=n as u64).map(|i| self.q(i)).collect()
    }

    /// The false stack among the first `n`, if any.
    pub fn false_index_within(&mut self, n: usize) -> Result<Option<usize>> {
        self.advance_to(n as u64)?;
        Ok(self
            .machine
            .halted_at
            .filter(|&k| k <= n as u64)
            .map(|k| k as usize))
    }
}

/// Parameters of one device run against a program.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceRun {
    pub config: DeviceConfig,
    pub scale: TimeScale,
    /// Number of observed stacks `N`.
    pub horizon: usize,
    /// Weighing duration `T`.
    pub t: f64,
    /// Largest duration the caller permits.
    pub t_cap: f64,
    pub trials: u64,
    pub seed: u64,
    pub prior_no_false: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    /// The program halts at step `witness`.
    Click {
        witness: usize,
        clicks: u64,
        trials: u64,
        first_trial: u64,
        /// Independent simulation halts exactly at `witness`.
        confirmed: bool,
    },
    NonClick {
        trials: u64,
        /// `None` when the bound does not apply at this duration.
        posterior_lower_bound: Option<f64>,
        bound: Option<WienerBound>,
        /// The program halts, but past the observed horizon.
        horizon_blind: bool,
        /// Halting step found by a separate simulation up to the step budget.
        halts_at: Option<u64>,
    },
}

impl Verdict {
    pub fn is_click(&self) -> bool {
        matches!(self, Verdict::Click { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceReport {
    pub verdict: Verdict,
    pub horizon: usize,
    pub t: f64,
    /// Program steps the device itself needed.
    pub steps_simulated: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct ClickTally {
    clicks: u64,
    first: Option<u64>,
}

impl ClickTally {
    fn merge(self, o: Self) -> Self {
        ClickTally {
            clicks: self.clicks + o.clicks,
            first: match (self.first, o.first) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            },
        }
    }
}

/// Whether the device clicks on `probe` (positions `x_0..x_N`) at time `t`:
/// `Σ_i (q_i^T − 1)|x_i|² > ε‖x‖₁²`.
pub fn device_clicks(weights: &[f64], probe: &[f64], scale: &TimeScale, epsilon: f64, t: f64) -> bool {
    let norm: f64 = probe
        .windows(2)
        .enumerate()
        .map(|(m, w)| scale.weight(m + 1) * (w[1] - w[0]) * (w[1] - w[0]))
        .sum();
    let excess: f64 = weights
        .iter()
        .zip(&probe[1..])
        .filter(|(&q, _)| q != coin::BASE_WEIGHT)
        .map(|(&q, &x)| growth::growth_minus_one(q - 1.0, t) * x * x)
        .sum();
    excess > epsilon * norm
}

/// Run the Brownian device on the first `horizon` stacks of `program`.
pub fn run_device(program: &ToyProgram, run: &DeviceRun) -> Result<DeviceReport> {
    if run.horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    if run.trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    if !(run.t > 0.0 && run.t <= run.t_cap) {
        return Err(Error::config(format!(
            "duration {} outside (0, {}]",
            run.t, run.t_cap
        )));
    }
    run.scale.validate()?;
    let cfg = run.config;
    let mut lazy = weights_for(program, cfg.gamma)?;
    let weights = lazy.prefix(run.horizon)?;
    let witness = lazy.false_index_within(run.horizon)?;
    let steps_simulated = lazy.steps_simulated();

    let scale = &run.scale;
    let tally = mc::run_trials(
        run.trials,
        run.seed,
        ClickTally::default,
        |acc: &mut ClickTally, rng: &mut TrialRng, i| {
            let traj = wiener::sample_trajectory_with(rng, scale, run.horizon)
                .expect("validated scale and horizon");
            if device_clicks(&weights, traj.positions(), scale, cfg.epsilon, run.t) {
                acc.clicks += 1;
                acc.first.get_or_insert(i);
            }
        },
        ClickTally::merge,
    );

    let verdict = match (tally.first, witness) {
        (Some(first_trial), Some(w)) => Verdict::Click {
            witness: w,
            clicks: tally.clicks,
            trials: run.trials,
            first_trial,
            confirmed: simulate(program, w as u64) == Some(w as u64),
        },
        (Some(_), None) => {
            return Err(Error::numerical(
                "run_device",
                "click on a system with no false stack",
            ))
        }
        (None, _) => {
            let posterior = match wiener::bayes_posterior_brownian(
                run.prior_no_false,
                cfg.epsilon,
                cfg.gamma,
                run.t,
                scale,
            ) {
                Ok(p) => Some(p),
                Err(Error::BoundNotApplicable { .. }) => None,
                Err(e) => return Err(e),
            };
            let halts_at = simulate(program, program.step_budget);
            Verdict::NonClick {
                trials: run.trials,
                posterior_lower_bound: posterior.map(|p| p.lower_bound),
                bound: posterior.map(|p| p.bound),
                horizon_blind: halts_at.is_some_and(|k| k > run.horizon as u64),
                halts_at,
            }
        }
    };
    Ok(DeviceReport {
        verdict,
        horizon: run.horizon,
        t: run.t,
        steps_simulated,
    })
}

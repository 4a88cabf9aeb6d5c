//! Shared metabolic energy pools.
//!
//! Every neuron draws on exactly one pool. A pool's capacity is proportional
//! to its member count, it regenerates a fixed fraction of capacity per step,
//! and each granted spike costs a fixed amount. A pool that cannot fund one
//! more spike is depleted: its members cannot fire and their membranes are
//! held at reset.
//!
//! Energy is stored in internal units. In floating mode one unit is one
//! energy unit. In fixed-point mode energies are integer codes of an unsigned
//! format whose top code is a full pool, so the ledger is exact.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::distance;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyConfig {
    pub neurons_per_pool: usize,
    pub cost_per_spike: f64,
    pub regen_fraction: f64,
    pub capacity_per_neuron: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            neurons_per_pool: 1,
            cost_per_spike: 0.0,
            regen_fraction: 0.05,
            capacity_per_neuron: 1.0,
        }
    }
}

impl EnergyConfig {
    pub fn new(neurons_per_pool: usize, cost_per_spike: f64) -> Self {
        Self {
            neurons_per_pool,
            cost_per_spike,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.neurons_per_pool == 0 {
            return Err(Error::InvalidConfig("neurons_per_pool must be at least 1".into()));
        }
        if !(self.cost_per_spike >= 0.0) || !self.cost_per_spike.is_finite() {
            return Err(Error::InvalidConfig("cost_per_spike must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.regen_fraction) {
            return Err(Error::InvalidConfig("regen_fraction must lie in [0, 1]".into()));
        }
        if !(self.capacity_per_neuron > 0.0) {
            return Err(Error::InvalidConfig("capacity_per_neuron must be positive".into()));
        }
        Ok(())
    }
}

/// Greedy nearest-neighbour pool assignment with random seats.
pub fn assign_pools<R: Rng + ?Sized>(
    positions: &[[f64; 3]],
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    assign_pools_with(positions, k, |free| rng.gen_range(0..free.len()))
}

/// Pool assignment where `pick_seat` chooses the seat as an index into the
/// ascending list of still-unassigned neurons.
pub fn assign_pools_with(
    positions: &[[f64; 3]],
    k: usize,
    mut pick_seat: impl FnMut(&[usize]) -> usize,
) -> Result<Vec<usize>> {
    let n = positions.len();
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!(
            "pool size {k} must lie in 1..={n}"
        )));
    }
    let mut assignment = vec![usize::MAX; n];
    let mut free: Vec<usize> = (0..n).collect();
    let mut pool = 0;
    while !free.is_empty() {
        let seat = free.remove(pick_seat(&free));
        assignment[seat] = pool;
        let mut by_distance: Vec<(f64, usize)> = free
            .iter()
            .map(|&j| (distance(&positions[seat], &positions[j]), j))
            .collect();
        by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in by_distance.iter().take(k - 1) {
            assignment[j] = pool;
        }
        free.retain(|&j| assignment[j] == usize::MAX);
        pool += 1;
    }
    Ok(assignment)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GateOutcome {
    pub granted: Vec<usize>,
    /// Pools that were able to fund a spike before gating and cannot now.
    pub newly_depleted: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyPoolSystem {
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
    energy: Vec<f64>,
    capacity: Vec<f64>,
    regen: Vec<f64>,
    cost: f64,
    unit: f64,
    depleted: Vec<bool>,
    inflow: Ledger,
    outflow: Ledger,
}

impl EnergyPoolSystem {
    /// Floating-point pools, all starting full.
    pub fn new(assignment: Vec<usize>, config: &EnergyConfig) -> Result<Self> {
        config.validate()?;
        let members = group_members(&assignment)?;
        let capacity: Vec<f64> = members
            .iter()
            .map(|m| m.len() as f64 * config.capacity_per_neuron)
            .collect();
        let regen = capacity.iter().map(|c| config.regen_fraction * c).collect();
        Ok(Self::assemble(
            assignment,
            members,
            capacity,
            regen,
            config.cost_per_spike,
            1.0,
        ))
    }

    /// Fixed-point pools: energies are unsigned `bits`-wide codes and a full
    /// pool of `neurons_per_pool` members sits at the top code.
    pub fn new_fixed_point(assignment: Vec<usize>, config: &EnergyConfig, bits: u32) -> Result<Self> {
        config.validate()?;
        if !(2..=32).contains(&bits) {
            return Err(Error::InvalidConfig(format!("energy format width {bits} out of range")));
        }
        let members = group_members(&assignment)?;
        let top = ((1u64 << bits) - 1) as f64;
        let unit = config.neurons_per_pool as f64 * config.capacity_per_neuron / top;
        let capacity: Vec<f64> = members
            .iter()
            .map(|m| (m.len() as f64 * config.capacity_per_neuron / unit).round().min(top))
            .collect();
        let regen = capacity
            .iter()
            .map(|c| (config.regen_fraction * c).round())
            .collect();
        let cost = (config.cost_per_spike / unit).round();
        Ok(Self::assemble(assignment, members, capacity, regen, cost, unit))
    }

    fn assemble(
        assignment: Vec<usize>,
        members: Vec<Vec<usize>>,
        capacity: Vec<f64>,
        regen: Vec<f64>,
        cost: f64,
        unit: f64,
    ) -> Self {
        let mut sys = Self {
            assignment,
            energy: capacity.clone(),
            depleted: vec![false; members.len()],
            members,
            capacity,
            regen,
            cost,
            unit,
            inflow: Ledger::default(),
            outflow: Ledger::default(),
        };
        sys.refresh_flags();
        sys
    }

    pub fn n_pools(&self) -> usize {
        self.members.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn pool_of(&self, neuron: usize) -> usize {
        self.assignment[neuron]
    }

    pub fn members(&self, pool: usize) -> &[usize] {
        &self.members[pool]
    }

    pub fn is_depleted(&self, pool: usize) -> bool {
        self.depleted[pool]
    }

    pub fn neuron_blocked(&self, neuron: usize) -> bool {
        self.depleted[self.assignment[neuron]]
    }

    /// Pool energy in energy units.
    pub fn energy(&self, pool: usize) -> f64 {
        self.energy[pool] * self.unit
    }

    pub fn capacity(&self, pool: usize) -> f64 {
        self.capacity[pool] * self.unit
    }

    /// Cost of one spike in energy units, as applied (rounded in fixed point).
    pub fn cost(&self) -> f64 {
        self.cost * self.unit
    }

    /// Size of one internal unit in energy units (1 in floating mode).
    pub fn unit(&self) -> f64 {
        self.unit
    }

    pub fn raw_energy(&self, pool: usize) -> f64 {
        self.energy[pool]
    }

    pub fn raw_cost(&self) -> f64 {
        self.cost
    }

    /// Energy restored to `pool` by one regeneration step, internal units.
    pub fn raw_regen(&self, pool: usize) -> f64 {
        self.regen[pool]
    }

    /// Total regenerated energy applied so far, internal units.
    pub fn raw_inflow(&self) -> f64 {
        self.inflow.value()
    }

    /// Total energy spent on granted spikes so far, internal units.
    pub fn raw_outflow(&self) -> f64 {
        self.outflow.value()
    }

    pub fn total_raw_energy(&self) -> f64 {
        self.energy.iter().sum()
    }

    pub fn set_energy(&mut self, pool: usize, energy: f64) {
        self.energy[pool] = (energy / self.unit).clamp(0.0, self.capacity[pool]);
        self.refresh_flags();
    }

    /// Returns every pool to capacity and clears the ledger.
    pub fn refill(&mut self) {
        self.energy.copy_from_slice(&self.capacity);
        self.inflow = Ledger::default();
        self.outflow = Ledger::default();
        self.refresh_flags();
    }

    fn refresh_flags(&mut self) {
        let cost = self.cost;
        for (flag, &e) in self.depleted.iter_mut().zip(&self.energy) {
            *flag = cost > 0.0 && e < cost;
        }
    }

    pub fn regenerate(&mut self) {
        for p in 0..self.energy.len() {
            let before = self.energy[p];
            let after = (before + self.regen[p]).min(self.capacity[p]);
            self.energy[p] = after;
            self.inflow.add(after - before);
        }
        self.refresh_flags();
    }

    fn try_fund(&mut self, neuron: usize) -> bool {
        let p = self.assignment[neuron];
        if self.energy[p] >= self.cost {
            self.energy[p] -= self.cost;
            self.outflow.add(self.cost);
            true
        } else {
            false
        }
    }

    /// Grants spikes in ascending neuron order while pools can fund them.
    pub fn gate_spikes(&mut self, proposals: &[usize]) -> GateOutcome {
        let was_depleted = self.depleted.clone();
        let mut sorted = proposals.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let granted = sorted.into_iter().filter(|&i| self.try_fund(i)).collect();
        self.refresh_flags();
        let newly_depleted = (0..self.depleted.len())
            .filter(|&p| self.depleted[p] && !was_depleted[p])
            .collect();
        GateOutcome {
            granted,
            newly_depleted,
        }
    }
}

/// Running total with Neumaier compensation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Ledger {
    sum: f64,
    carry: f64,
}

impl Ledger {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn group_members(assignment: &[usize]) -> Result<Vec<Vec<usize>>> {
    if assignment.is_empty() {
        return Err(Error::EmptyInput("pool assignment"));
    }
    let n_pools = assignment.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); n_pools];
    for (neuron, &p) in assignment.iter().enumerate() {
        members[p].push(neuron);
    }
    if members.iter().any(Vec::is_empty) {
        return Err(Error::InvalidConfig("pool indices must be contiguous".into()));
    }
    Ok(members)
}

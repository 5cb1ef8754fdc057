use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::report::{summarize, ScenarioReport};
use super::scenario::{
    AgentGroup, BalanceDistribution, Behavior, PriceModel, Scenario, Shock, ShockKind,
};
use super::SimError;
use crate::governance::{
    sybil_split, tally, Ballot, Proposal, TallyResult, Voter, VotingMechanism,
};
use crate::metrics::{concentration_report, ConcentrationReport, HolderDistribution, Holding};
use crate::quantity::Quantity;
use crate::spec::{validate_spec, EconomySpec};
use crate::supply::{
    flows_for_horizon, step_supply, vesting_released, EpochFlows, SupplyPolicy, SupplyState,
    Truncation,
};

/// Largest holder count reported in `top_k_shares`.
const TOP_K: usize = 10;

/// Pareto draws are clamped here so one unlucky sample cannot dominate.
const MAX_SAMPLE: f64 = 1e15;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub kind: String,
    pub detail: String,
}

impl Event {
    fn new(kind: &str, detail: impl Into<String>) -> Event {
        Event {
            kind: kind.to_string(),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernanceOutcome {
    pub proposal: String,
    pub participants: usize,
    pub result: TallyResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub supply: SupplyState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Truncation>,
    /// Circulating tokens not held by any agent.
    pub market_pool: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    /// Token balances per identity.
    pub holdings: HolderDistribution,
    /// `None` when no agent holds anything.
    pub concentration: Option<ConcentrationReport>,
    /// Voting power per identity cluster.
    pub voting_power: HolderDistribution,
    pub voting_concentration: Option<ConcentrationReport>,
    /// Some cluster holds a strict majority of voting power.
    pub capture: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracked_share: Option<f64>,
    pub governance: Vec<GovernanceOutcome>,
    pub events: Vec<Event>,
}

struct Agent {
    voter: Voter,
    group: usize,
    credits_follow_balance: bool,
}

struct Grant {
    group: usize,
    schedule: crate::supply::VestingSchedule,
    released: Quantity,
}

struct Engine<'a> {
    scenario: &'a Scenario,
    policy: SupplyPolicy,
    mechanism: VotingMechanism,
    agents: Vec<Agent>,
    market: Quantity,
    state: SupplyState,
    price: f64,
    grants: Vec<Grant>,
    flows: Vec<EpochFlows>,
    conviction: Quantity,
    rng: ChaCha8Rng,
}

fn sample_balance(rng: &mut ChaCha8Rng, dist: &BalanceDistribution) -> Quantity {
    match *dist {
        BalanceDistribution::Fixed { amount } => Quantity::from(amount),
        BalanceDistribution::Uniform { min, max } => Quantity::from(rng.random_range(min..=max)),
        BalanceDistribution::Pareto { scale, shape } => {
            let u: f64 = rng.random();
            let x = (scale / (1.0 - u).powf(1.0 / shape))
                .min(MAX_SAMPLE)
                .floor();
            Quantity::from(x as u64)
        }
    }
}

fn matches(agent: &Agent, groups: &[AgentGroup], target: Option<&str>) -> bool {
    match target {
        None => true,
        Some(t) => {
            agent.voter.cluster() == t || groups[agent.group].name == t || agent.voter.id == t
        }
    }
}

impl<'a> Engine<'a> {
    fn new(spec: &EconomySpec, scenario: &'a Scenario) -> Result<Engine<'a>, SimError> {
        scenario.check()?;
        let report = validate_spec(spec);
        if !report.is_valid() {
            return Err(SimError::InvalidSpec(report.errors().cloned().collect()));
        }
        let token = match &scenario.token {
            Some(sym) => spec
                .token(sym)
                .ok_or_else(|| SimError::UnknownToken(sym.clone()))?,
            None => spec
                .primary_token()
                .ok_or_else(|| SimError::UnknownToken("<none>".into()))?,
        };
        let mechanism = scenario
            .mechanism
            .clone()
            .unwrap_or_else(|| spec.governance.chosen_mechanism.clone());
        mechanism.check()?;

        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        let mut agents = Vec::with_capacity(scenario.population() as usize);
        for (gi, g) in scenario.agents.iter().enumerate() {
            for i in 0..g.population {
                let id = format!("{}-{i:04}", g.name);
                let balance = sample_balance(&mut rng, &g.balance);
                let mut voter = Voter::new(id, balance.clone())
                    .with_lock(g.lock_epochs)
                    .with_reputation(g.reputation.clone())
                    .with_credits(g.credits.clone().unwrap_or(balance));
                if let Some(c) = &g.cluster {
                    voter = voter.with_cluster(c.clone());
                }
                agents.push(Agent {
                    voter,
                    group: gi,
                    credits_follow_balance: g.credits.is_none(),
                });
            }
        }

        let grants: Vec<Grant> = scenario
            .vesting
            .iter()
            .map(|v| Grant {
                group: scenario
                    .agents
                    .iter()
                    .position(|g| g.name == v.group)
                    .expect("checked"),
                schedule: v.schedule.clone(),
                released: Quantity::zero(),
            })
            .collect();

        let held: Quantity = agents.iter().map(|a| &a.voter.balance).sum();
        let state = SupplyState {
            circulating: &held + &scenario.market_pool,
            vesting_locked: grants.iter().map(|g| &g.schedule.total).sum(),
            ..SupplyState::default()
        };
        if let Some(cap) = token.supply_policy.s_max() {
            if &state.outstanding() > cap {
                return Err(SimError::InvalidScenario(format!(
                    "initial supply {} exceeds the {} cap {cap}",
                    state.outstanding(),
                    token.symbol
                )));
            }
        }

        Ok(Engine {
            scenario,
            policy: token.supply_policy.clone(),
            mechanism,
            agents,
            market: scenario.market_pool.clone(),
            state,
            price: scenario.reference_price,
            grants,
            flows: flows_for_horizon(&scenario.flows, scenario.epochs),
            conviction: Quantity::zero(),
            rng,
        })
    }

    fn groups(&self) -> &'a [AgentGroup] {
        &self.scenario.agents
    }

    fn members(&self, group: usize) -> Vec<usize> {
        (0..self.agents.len())
            .filter(|i| self.agents[*i].group == group)
            .collect()
    }

    /// Moves whole tokens from an agent to the market.
    fn sell(&mut self, i: usize, fraction: f64) -> Result<Quantity, SimError> {
        let f = Quantity::from_f64(fraction)
            .ok_or_else(|| SimError::InvalidScenario("fraction is not finite".into()))?;
        let a = &mut self.agents[i].voter;
        let amount = (&a.balance * &f).floor();
        a.balance -= &amount;
        self.market += &amount;
        Ok(amount)
    }

    /// Pays `amount` evenly to the members of `group`.
    fn pay_group(&mut self, group: usize, amount: &Quantity) {
        let members = self.members(group);
        if members.is_empty() || amount.is_zero() {
            return;
        }
        let each = amount / &Quantity::from(members.len() as u64);
        for i in members {
            self.agents[i].voter.balance += &each;
        }
    }

    fn step(&mut self, epoch: u64) -> Result<EpochRecord, SimError> {
        let mut events = Vec::new();
        let mut sold = Quantity::zero();
        let mut bought = Quantity::zero();
        let groups = self.groups();

        // Agent actions, reacting to last epoch's price.
        let mut sellers = 0usize;
        let mut panic_sold = Quantity::zero();
        for i in 0..self.agents.len() {
            let g = &groups[self.agents[i].group];
            if let Behavior::ThresholdSeller { fraction, drop } = g.behavior {
                if self.price < self.scenario.reference_price * (1.0 - drop) {
                    let amount = self.sell(i, fraction)?;
                    if amount.is_positive() {
                        sellers += 1;
                        panic_sold += amount;
                    }
                }
            }
            let v = &mut self.agents[i].voter;
            v.lock_remaining = if g.relock {
                g.lock_epochs
            } else {
                v.lock_remaining.saturating_sub(1)
            };
        }
        if sellers > 0 {
            events.push(Event::new(
                "threshold_sales",
                format!("{sellers} identities sold {panic_sold} below the price trigger"),
            ));
            sold += panic_sold;
        }

        // Supply step, with vesting releases and scripted flows settled against the market.
        let mut flows = self.flows[(epoch - 1) as usize].clone();
        let mut releases = Vec::with_capacity(self.grants.len());
        for g in &self.grants {
            let due = &vesting_released(&g.schedule, epoch) - &g.released;
            let due = due.max(Quantity::zero());
            flows.vest_release += &due;
            releases.push(due);
        }
        let step = step_supply(&self.state, &flows, &self.policy)?;
        let minted = step
            .truncation
            .as_ref()
            .map_or(flows.minted.clone(), |t| t.minted.clone());
        if let Some(t) = &step.truncation {
            events.push(Event::new(
                "mint_truncated",
                format!(
                    "requested {} but minted {} at the cap",
                    t.requested, t.minted
                ),
            ));
        }
        self.market =
            &(&self.market + &minted) - &(&(&flows.burned + &flows.buyback) + &flows.stake_delta);
        if self.market.is_negative() {
            return Err(SimError::MarketUnderflow(self.market.clone()));
        }
        for (gi, due) in releases.into_iter().enumerate() {
            if due.is_positive() {
                let group = self.grants[gi].group;
                self.grants[gi].released += &due;
                self.pay_group(group, &due);
                events.push(Event::new(
                    "vesting_release",
                    format!("{due} released to {}", groups[group].name),
                ));
            }
        }
        let truncation = step.truncation;
        self.state = step.state;
        self.state.epoch = epoch;

        for shock in self.scenario.shocks.iter().filter(|s| s.epoch == epoch) {
            self.apply_shock(shock, &mut sold, &mut bought, &mut events)?;
        }

        let price = match self.scenario.price_model {
            PriceModel::None => None,
            PriceModel::LinearImpact { coefficient } => {
                let circ = self.state.circulating.to_f64();
                let net = if circ > 0.0 {
                    (&bought - &sold).to_f64() / circ
                } else {
                    0.0
                };
                self.price = (self.price * (1.0 + coefficient * net)).max(0.0);
                Some(self.price)
            }
        };

        self.sync_credits();
        let governance = match &self.scenario.governance {
            Some(schedule) if schedule.is_round(epoch) => {
                vec![self.governance_round(epoch, &mut events)?]
            }
            _ => Vec::new(),
        };

        let held: Quantity = self.agents.iter().map(|a| &a.voter.balance).sum();
        if &held + &self.market != self.state.circulating {
            return Err(SimError::Invariant(format!(
                "agent balances {held} plus market {} differ from circulating {}",
                self.market, self.state.circulating
            )));
        }

        let holdings = HolderDistribution::new(
            self.agents
                .iter()
                .map(|a| Holding {
                    entity: a.voter.id.clone(),
                    weight: a.voter.balance.clone(),
                })
                .collect(),
        )?;
        let concentration = report_if_positive(&holdings)?;

        let mut per_cluster: BTreeMap<&str, Vec<Quantity>> = BTreeMap::new();
        for a in &self.agents {
            per_cluster
                .entry(a.voter.cluster())
                .or_default()
                .push(self.mechanism.power(&a.voter));
        }
        let power: BTreeMap<&str, Quantity> = per_cluster
            .into_iter()
            .map(|(c, p)| (c, p.into_iter().sum()))
            .collect();
        let total_power: Quantity = power.values().sum();
        let tracked_share = match &self.scenario.tracked_cluster {
            Some(c) if total_power.is_positive() => {
                Some((&power.get(c.as_str()).cloned().unwrap_or_default() / &total_power).to_f64())
            }
            _ => None,
        };
        let voting_power = HolderDistribution::new(
            power
                .into_iter()
                .map(|(c, w)| Holding {
                    entity: c.to_string(),
                    weight: w,
                })
                .collect(),
        )?;
        let voting_concentration = report_if_positive(&voting_power)?;
        let capture = voting_concentration
            .as_ref()
            .is_some_and(|r| r.nakamoto == 1);

        Ok(EpochRecord {
            epoch,
            supply: self.state.clone(),
            truncation,
            market_pool: self.market.clone(),
            price,
            holdings,
            concentration,
            voting_power,
            voting_concentration,
            capture,
            tracked_share,
            governance,
            events,
        })
    }

    fn sync_credits(&mut self) {
        for a in &mut self.agents {
            if a.credits_follow_balance {
                a.voter.credits = a.voter.balance.clone();
            }
        }
    }

    fn apply_shock(
        &mut self,
        shock: &Shock,
        sold: &mut Quantity,
        bought: &mut Quantity,
        events: &mut Vec<Event>,
    ) -> Result<(), SimError> {
        let groups = self.groups();
        let target = shock.target.as_deref();
        let hit: Vec<usize> = (0..self.agents.len())
            .filter(|i| matches(&self.agents[*i], groups, target))
            .collect();
        let label = target.unwrap_or("all agents");
        if hit.is_empty() && shock.kind != ShockKind::UnlockEvent {
            return Err(SimError::InvalidScenario(format!(
                "shock target `{label}` matches no agent"
            )));
        }
        match shock.kind {
            ShockKind::SellOff => {
                let mut total = Quantity::zero();
                for i in hit {
                    total += self.sell(i, shock.magnitude)?;
                }
                events.push(Event::new("sell_off", format!("{label} sold {total}")));
                *sold += total;
            }
            ShockKind::WhaleAccumulation => {
                let share = Quantity::from_f64(shock.magnitude).expect("checked finite");
                let whale: Quantity = hit.iter().map(|i| &self.agents[*i].voter.balance).sum();
                let all: Quantity = self.agents.iter().map(|a| &a.voter.balance).sum();
                let others = &all - &whale;
                let wanted = (&share * &all).ceil();
                let need = (&wanted - &whale).min(others.clone());
                if !need.is_positive() {
                    events.push(Event::new(
                        "whale_accumulation",
                        format!("{label} already holds the target share"),
                    ));
                    return Ok(());
                }
                let in_hit: Vec<bool> = (0..self.agents.len())
                    .map(|i| hit.binary_search(&i).is_ok())
                    .collect();
                let mut taken = Quantity::zero();
                let mut order: Vec<usize> =
                    (0..self.agents.len()).filter(|i| !in_hit[*i]).collect();
                for &i in &order {
                    let b = &mut self.agents[i].voter.balance;
                    let part = (&(&need * &*b) / &others).floor();
                    *b -= &part;
                    taken += part;
                }
                // Flooring leaves a remainder; the largest remaining holders cover it.
                order.sort_by(|a, b| {
                    let (va, vb) = (&self.agents[*a].voter, &self.agents[*b].voter);
                    vb.balance.cmp(&va.balance).then_with(|| va.id.cmp(&vb.id))
                });
                for i in order {
                    let rest = &need - &taken;
                    if !rest.is_positive() {
                        break;
                    }
                    let b = &mut self.agents[i].voter.balance;
                    let part = rest.min(b.clone());
                    *b -= &part;
                    taken += part;
                }
                let each = &taken / &Quantity::from(hit.len() as u64);
                for i in &hit {
                    self.agents[*i].voter.balance += &each;
                }
                events.push(Event::new(
                    "whale_accumulation",
                    format!("{label} bought {taken} from other holders"),
                ));
                *bought += taken;
            }
            ShockKind::SybilSplit => {
                let k = shock.magnitude as usize;
                let mut next = Vec::with_capacity(self.agents.len() + hit.len() * (k - 1));
                let before = self.agents.len();
                let mut ids: std::collections::HashSet<String> =
                    self.agents.iter().map(|a| a.voter.id.clone()).collect();
                for (i, a) in std::mem::take(&mut self.agents).into_iter().enumerate() {
                    if hit.binary_search(&i).is_ok() {
                        let cluster = a.voter.cluster().to_string();
                        for mut voter in sybil_split(std::slice::from_ref(&a.voter), &cluster, k)? {
                            // a clone from an earlier split may already own this id
                            if voter.id != a.voter.id {
                                while !ids.insert(voter.id.clone()) {
                                    voter.id.push('\'');
                                }
                            }
                            next.push(Agent {
                                voter,
                                group: a.group,
                                credits_follow_balance: a.credits_follow_balance,
                            });
                        }
                    } else {
                        next.push(a);
                    }
                }
                self.agents = next;
                events.push(Event::new(
                    "sybil_split",
                    format!(
                        "{label} split {k} ways, identities {before} -> {}",
                        self.agents.len()
                    ),
                ));
            }
            ShockKind::UnlockEvent => {
                let f = Quantity::from_f64(shock.magnitude).expect("checked finite");
                let mut total = Quantity::zero();
                let mut pay = Vec::new();
                for (gi, g) in self.grants.iter_mut().enumerate() {
                    if target.is_some_and(|t| groups[g.group].name != t) {
                        continue;
                    }
                    let remaining = &g.schedule.total - &g.released;
                    let amount = (&remaining * &f).floor();
                    g.released += &amount;
                    total += &amount;
                    pay.push((gi, amount));
                }
                let flows = EpochFlows {
                    vest_release: total.clone(),
                    ..EpochFlows::default()
                };
                let epoch = self.state.epoch;
                self.state = step_supply(&self.state, &flows, &self.policy)?.state;
                self.state.epoch = epoch;
                for (gi, amount) in pay {
                    self.pay_group(self.grants[gi].group, &amount);
                }
                events.push(Event::new(
                    "unlock_event",
                    format!("{total} unlocked early for {label}"),
                ));
            }
        }
        Ok(())
    }

    fn governance_round(
        &mut self,
        epoch: u64,
        events: &mut Vec<Event>,
    ) -> Result<GovernanceOutcome, SimError> {
        let schedule = self.scenario.governance.as_ref().expect("round scheduled");
        let groups = self.groups();

        // One draw per cluster, in cluster order, so splitting a cluster
        // leaves every other participation decision unchanged.
        let mut clusters: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, a) in self.agents.iter().enumerate() {
            clusters.entry(a.voter.cluster()).or_default().push(i);
        }
        let mut ballots = Vec::new();
        for members in clusters.values() {
            let roll: f64 = self.rng.random();
            for &i in members {
                let a = &self.agents[i];
                let g = &groups[a.group];
                if let Behavior::GovernanceParticipant { p } = g.behavior {
                    if roll < p {
                        ballots.push(Ballot::new(a.voter.clone(), g.stance));
                    }
                }
            }
        }

        let mut proposal = Proposal::new(
            format!("p{epoch}"),
            schedule.kind,
            schedule.threshold.clone(),
        );
        if let VotingMechanism::Conviction { alpha } = &self.mechanism {
            proposal.id = "standing".into();
            proposal.prior_conviction = self.conviction.clone();
            let threshold = match &schedule.conviction_threshold {
                Some(t) => t.clone(),
                None => {
                    let total: Quantity = self
                        .agents
                        .iter()
                        .map(|a| self.mechanism.power(&a.voter))
                        .sum();
                    &(&schedule.threshold * &total) / &(&Quantity::one() - alpha)
                }
            };
            proposal.conviction_threshold = Some(threshold);
        }
        let result = tally(&proposal, &ballots, &self.mechanism)?;
        if let Some(y) = &result.conviction {
            self.conviction = y.clone();
        }
        if result.passed {
            events.push(Event::new(
                "proposal_passed",
                format!("{} passed", proposal.id),
            ));
        }
        Ok(GovernanceOutcome {
            proposal: proposal.id,
            participants: ballots.len(),
            result,
        })
    }
}

fn report_if_positive(dist: &HolderDistribution) -> Result<Option<ConcentrationReport>, SimError> {
    if dist.is_empty() || !dist.total().is_positive() {
        return Ok(None);
    }
    Ok(Some(concentration_report(dist, TOP_K)?))
}

/// Runs a scenario to completion.
pub fn run_scenario(spec: &EconomySpec, scenario: &Scenario) -> Result<ScenarioReport, SimError> {
    run_scenario_with(spec, scenario, |_| {})
}

/// Runs a scenario, handing each epoch record to `on_epoch` as soon as it is complete.
pub fn run_scenario_with(
    spec: &EconomySpec,
    scenario: &Scenario,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<ScenarioReport, SimError> {
    let mut engine = Engine::new(spec, scenario)?;
    let agents = engine.agents.len();
    let mut epochs = Vec::with_capacity(scenario.epochs as usize);
    for epoch in 1..=scenario.epochs {
        let record = engine.step(epoch).map_err(|e| SimError::AtEpoch {
            epoch,
            source: Box::new(e),
        })?;
        on_epoch(&record);
        epochs.push(record);
    }
    let summary = summarize(&epochs);
    Ok(ScenarioReport {
        scenario: scenario.name.clone(),
        spec: spec.name.clone(),
        token: scenario
            .token
            .clone()
            .or_else(|| spec.primary_token().map(|t| t.symbol.clone()))
            .unwrap_or_default(),
        seed: scenario.seed,
        mechanism: engine.mechanism,
        initial_agents: agents,
        epochs,
        summary,
    })
}

//! Agent roster: how limb agents are grouped into shared-parameter actors,
//! and how group actions map onto the walker's joints.

use serde::{Deserialize, Serialize};

use crate::env::morphology::MorphologyConfig;
use crate::error::{Result, WalkerError};
use crate::obs::{AgentId, ObservationLayout};

/// Which limbs participate as agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Legs only; arm joints hold their default posture.
    Bipedal,
    /// Legs and arms as two agent groups.
    ArmSwing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Mash,
    SingleAgentPpo,
}

/// How a group actor consumes its agents' observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActorMode {
    /// One evaluation per group on the concatenated member observations,
    /// emitting the full group action.
    GroupConcat,
    /// One evaluation per member with shared weights, each emitting that
    /// member's action slice.
    PerLimb,
}

/// One shared-parameter actor and the agents it serves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub members: Vec<AgentId>,
    /// Evaluate the actor once per member instead of on the concatenation.
    pub per_limb: bool,
    /// The whole group action forms a single importance ratio (the
    /// single-agent baseline) instead of one ratio per member.
    pub single_ratio: bool,
}

impl GroupSpec {
    pub fn member_dof(&self, morph: &MorphologyConfig, member: usize) -> usize {
        morph.limb(self.members[member].limb_index()).dof()
    }

    pub fn member_obs_width(&self, morph: &MorphologyConfig, member: usize) -> usize {
        ObservationLayout { dof_agent: self.member_dof(morph, member) }.width()
    }

    /// Actor input width under the group's evaluation mode.
    pub fn input_width(&self, morph: &MorphologyConfig) -> usize {
        if self.per_limb {
            self.member_obs_width(morph, 0)
        } else {
            (0..self.members.len()).map(|m| self.member_obs_width(morph, m)).sum()
        }
    }

    /// Actor output width under the group's evaluation mode.
    pub fn output_dim(&self, morph: &MorphologyConfig) -> usize {
        if self.per_limb {
            self.member_dof(morph, 0)
        } else {
            self.action_dim(morph)
        }
    }

    /// Full group action width (all members).
    pub fn action_dim(&self, morph: &MorphologyConfig) -> usize {
        (0..self.members.len()).map(|m| self.member_dof(morph, m)).sum()
    }

    /// Per-ratio-agent slices of the group action: one per member, or one
    /// covering everything for a single-ratio group.
    pub fn ratio_slices(&self, morph: &MorphologyConfig) -> Vec<std::ops::Range<usize>> {
        if self.single_ratio {
            return vec![0..self.action_dim(morph)];
        }
        let mut out = Vec::with_capacity(self.members.len());
        let mut cursor = 0;
        for m in 0..self.members.len() {
            let dof = self.member_dof(morph, m);
            out.push(cursor..cursor + dof);
            cursor += dof;
        }
        out
    }

    /// Global joint index for each group-action dimension.
    pub fn joint_indices(&self, morph: &MorphologyConfig) -> Vec<usize> {
        let mut out = Vec::new();
        for agent in &self.members {
            let limb = agent.limb_index();
            let offset = morph.limb_joint_offset(limb);
            out.extend(offset..offset + morph.limb(limb).dof());
        }
        out
    }

    pub fn n_ratio_agents(&self) -> usize {
        if self.single_ratio {
            1
        } else {
            self.members.len()
        }
    }
}

/// The full agent roster: groups partition the agents, and each group owns
/// exactly one shared-parameter actor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRoster {
    pub groups: Vec<GroupSpec>,
    pub mode: TrainMode,
}

impl AgentRoster {
    /// Cooperative roster: a leg group, plus an arm group in arm-swing mode.
    pub fn mash(mode: TrainMode, actor_mode: ActorMode, morph: &MorphologyConfig) -> Result<Self> {
        if mode == TrainMode::ArmSwing && !morph.has_arms() {
            return Err(WalkerError::config(
                "arm-swing mode requires a morphology with arms".to_string(),
            ));
        }
        let per_limb = actor_mode == ActorMode::PerLimb;
        let mut groups = vec![GroupSpec {
            name: "legs".to_string(),
            members: vec![AgentId::LEG_LEFT, AgentId::LEG_RIGHT],
            per_limb,
            single_ratio: false,
        }];
        if mode == TrainMode::ArmSwing {
            groups.push(GroupSpec {
                name: "arms".to_string(),
                members: vec![AgentId::ARM_LEFT, AgentId::ARM_RIGHT],
                per_limb,
                single_ratio: false,
            });
        }
        Ok(Self { groups, mode })
    }

    /// Single-agent baseline roster: one actor over the concatenation of all
    /// agent observations, one importance ratio.
    pub fn single_agent(mode: TrainMode, morph: &MorphologyConfig) -> Result<Self> {
        if mode == TrainMode::ArmSwing && !morph.has_arms() {
            return Err(WalkerError::config(
                "arm-swing mode requires a morphology with arms".to_string(),
            ));
        }
        let mut members = vec![AgentId::LEG_LEFT, AgentId::LEG_RIGHT];
        if mode == TrainMode::ArmSwing {
            members.push(AgentId::ARM_LEFT);
            members.push(AgentId::ARM_RIGHT);
        }
        Ok(Self {
            groups: vec![GroupSpec {
                name: "body".to_string(),
                members,
                per_limb: false,
                single_ratio: true,
            }],
            mode,
        })
    }

    pub fn build(algorithm: Algorithm, mode: TrainMode, actor_mode: ActorMode, morph: &MorphologyConfig) -> Result<Self> {
        match algorithm {
            Algorithm::Mash => Self::mash(mode, actor_mode, morph),
            Algorithm::SingleAgentPpo => Self::single_agent(mode, morph),
        }
    }

    /// Number of importance-ratio agents (and critic heads).
    pub fn n_agents(&self) -> usize {
        self.groups.iter().map(GroupSpec::n_ratio_agents).sum()
    }

    /// All distinct limb agents, in group order.
    pub fn all_members(&self) -> Vec<AgentId> {
        let mut out = Vec::new();
        for g in &self.groups {
            for m in &g.members {
                if !out.contains(m) {
                    out.push(*m);
                }
            }
        }
        out
    }

    /// Joints controlled by any group, in global index order.
    pub fn controlled_joints(&self, morph: &MorphologyConfig) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .groups
            .iter()
            .flat_map(|g| g.joint_indices(morph))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

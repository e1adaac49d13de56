use serde::{Deserialize, Serialize};

use crate::domain::StageId;
use crate::time::Seconds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Pending,
    Active,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageNode {
    pub stage: StageId,
    pub status: StageStatus,
    pub completion_level: f64,
    pub entered_at: Option<Seconds>,
    pub exited_at: Option<Seconds>,
    /// First and last turn index spoken in this stage.
    pub turn_span: Option<[u64; 2]>,
}

impl StageNode {
    fn pending(stage: StageId) -> Self {
        StageNode {
            stage,
            status: StageStatus::Pending,
            completion_level: 0.0,
            entered_at: None,
            exited_at: None,
            turn_span: None,
        }
    }

    /// Time spent in the stage, measuring an active stage up to `now`.
    pub fn duration(&self, now: Seconds) -> Option<Seconds> {
        let entered = self.entered_at?;
        Some(self.exited_at.unwrap_or(now).saturating_sub(entered))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationGraph {
    pub session_id: String,
    pub scenario_id: String,
    pub nodes: Vec<StageNode>,
    pub created_at: Seconds,
    pub finished_at: Option<Seconds>,
}

impl ConversationGraph {
    /// A graph with S1 active from `created_at`.
    pub fn new(session_id: impl Into<String>, scenario_id: impl Into<String>, created_at: Seconds) -> Self {
        let mut nodes: Vec<StageNode> = StageId::ALL.into_iter().map(StageNode::pending).collect();
        nodes[0].status = StageStatus::Active;
        nodes[0].entered_at = Some(created_at);
        ConversationGraph {
            session_id: session_id.into(),
            scenario_id: scenario_id.into(),
            nodes,
            created_at,
            finished_at: None,
        }
    }

    pub fn node(&self, stage: StageId) -> &StageNode {
        &self.nodes[stage.index()]
    }

    pub(crate) fn node_mut(&mut self, stage: StageId) -> &mut StageNode {
        &mut self.nodes[stage.index()]
    }

    pub fn active(&self) -> Option<StageId> {
        self.nodes.iter().find(|n| n.status == StageStatus::Active).map(|n| n.stage)
    }

    pub fn is_finished(&self) -> bool {
        self.finished_at.is_some()
    }

    pub fn completion_levels(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.completion_level).collect()
    }

    pub fn mean_completion(&self) -> f64 {
        self.nodes.iter().map(|n| n.completion_level).sum::<f64>() / self.nodes.len() as f64
    }

    /// Completes the active stage at `now` and activates the next one.
    /// Returns the newly active stage, or `None` if the session finished.
    pub(crate) fn advance(&mut self, now: Seconds) -> Option<StageId> {
        let current = self.active()?;
        let node = self.node_mut(current);
        node.status = StageStatus::Complete;
        node.exited_at = Some(now);
        match current.next() {
            Some(next) => {
                let node = self.node_mut(next);
                node.status = StageStatus::Active;
                node.entered_at = Some(now);
                Some(next)
            }
            None => {
                self.finished_at = Some(now);
                None
            }
        }
    }

    /// Checks every structural invariant, naming the first one broken.
    pub fn check(&self) -> Result<(), String> {
        if self.nodes.len() != 5 {
            return Err(format!("expected 5 nodes, found {}", self.nodes.len()));
        }
        // statuses read complete* active? pending*
        let mut phase = 0;
        for (i, n) in self.nodes.iter().enumerate() {
            if n.stage != StageId::ALL[i] {
                return Err(format!("node {i} is {}", n.stage));
            }
            let rank = match n.status {
                StageStatus::Complete => 0,
                StageStatus::Active => 1,
                StageStatus::Pending => 2,
            };
            if rank < phase || (rank == 1 && phase == 1) {
                return Err(format!("{} is {:?} out of order", n.stage, n.status));
            }
            phase = if rank == 1 { 2 } else { rank };
            if n.entered_at.is_some() != (n.status != StageStatus::Pending) {
                return Err(format!("{} entered_at inconsistent with status", n.stage));
            }
            if n.exited_at.is_some() != (n.status == StageStatus::Complete) {
                return Err(format!("{} exited_at inconsistent with status", n.stage));
            }
            if let (Some(a), Some(b)) = (n.entered_at, n.exited_at) {
                if a > b {
                    return Err(format!("{} exits before it is entered", n.stage));
                }
            }
            if !(0.0..=1.0).contains(&n.completion_level) {
                return Err(format!("{} completion level out of range", n.stage));
            }
        }
        let all_complete = self.nodes.iter().all(|n| n.status == StageStatus::Complete);
        if self.finished_at.is_some() != all_complete {
            return Err("finished_at inconsistent with node statuses".into());
        }
        if !all_complete && self.active().is_none() {
            return Err("running session without an active stage".into());
        }
        Ok(())
    }
}

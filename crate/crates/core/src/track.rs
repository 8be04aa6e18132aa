//! Tracked-object records, tracklets and the lifecycle state machine.

use alloc::vec::Vec;

use crate::bbox::BBox;
use crate::error::Error;
use crate::Result;

/// Lifecycle state of a node (and, through its last node, of a tracklet).
///
/// The only legal transitions are Tracked -> Lost, Lost -> Tracked,
/// Tracked -> Quitted and Lost -> Quitted; Quitted is terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeState {
    Tracked,
    Lost,
    Quitted,
}

/// Why a tracklet quit. Boundary exits are terminal for association as
/// well; aging out merely retires the tracklet from frame-to-frame
/// assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuitReason {
    OutOfBounds,
    AgedOut,
}

/// The tracked-object record: frame, identity, box and state, seven scalar
/// degrees of freedom in all. `det_index` ties a node back to the detection
/// (and its embedding) it came from; interpolated nodes have none.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackNode {
    pub frame: u32,
    pub id: i64,
    pub bbox: BBox,
    pub state: NodeState,
    pub det_index: Option<u32>,
    pub interpolated: bool,
}

impl TrackNode {
    pub fn new(frame: u32, id: i64, bbox: BBox) -> Self {
        TrackNode { frame, id, bbox, state: NodeState::Tracked, det_index: None, interpolated: false }
    }

    pub fn with_det_index(mut self, det_index: u32) -> Self {
        self.det_index = Some(det_index);
        self
    }
}

/// An ordered run of nodes with strictly increasing frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub tracklet_id: i64,
    pub nodes: Vec<TrackNode>,
    lost_age: u32,
    quit_reason: Option<QuitReason>,
}

/// A completed, gap-filled and smoothed tracklet.
pub type Trajectory = Tracklet;

impl Tracklet {
    pub fn new(tracklet_id: i64, first: TrackNode) -> Self {
        Tracklet { tracklet_id, nodes: alloc::vec![first], lost_age: 0, quit_reason: None }
    }

    pub fn from_nodes(tracklet_id: i64, nodes: Vec<TrackNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::EmptySequence);
        }
        if nodes.windows(2).any(|w| w[1].frame <= w[0].frame) {
            return Err(Error::NonMonotonicFrames);
        }
        Ok(Tracklet { tracklet_id, nodes, lost_age: 0, quit_reason: None })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn first(&self) -> &TrackNode {
        self.nodes.first().expect("tracklet is never empty")
    }

    pub fn last(&self) -> &TrackNode {
        self.nodes.last().expect("tracklet is never empty")
    }

    /// Tracklet state is the state of its last node.
    pub fn state(&self) -> NodeState {
        self.last().state
    }

    pub fn quit_reason(&self) -> Option<QuitReason> {
        self.quit_reason
    }

    /// Consecutive frames without a match, maintained by `advance_state`.
    pub fn lost_age(&self) -> u32 {
        self.lost_age
    }

    pub(crate) fn set_quit(&mut self, reason: QuitReason) {
        self.quit_reason = Some(reason);
        if let Some(last) = self.nodes.last_mut() {
            last.state = NodeState::Quitted;
        }
    }

    /// Appends a matched node and resets the lost counter.
    pub fn push(&mut self, node: TrackNode) -> Result<()> {
        if self.state() == NodeState::Quitted {
            return Err(Error::TerminalState);
        }
        if node.frame <= self.last().frame {
            return Err(Error::NonMonotonicFrames);
        }
        self.nodes.push(node);
        self.lost_age = 0;
        Ok(())
    }

    /// Runs one step of the lifecycle state machine.
    ///
    /// Boundary exit always quits. Otherwise a match keeps (or returns) the
    /// tracklet to Tracked, and a miss sends it to Lost; staying Lost for
    /// more than `max_lost_age` consecutive frames quits it for good.
    pub fn advance_state(
        &mut self,
        matched: bool,
        exits_boundary: bool,
        max_lost_age: u32,
    ) -> Result<NodeState> {
        if self.state() == NodeState::Quitted {
            return Err(Error::TerminalState);
        }
        let next = if exits_boundary {
            self.set_quit(QuitReason::OutOfBounds);
            NodeState::Quitted
        } else if matched {
            self.lost_age = 0;
            self.nodes.last_mut().expect("non-empty").state = NodeState::Tracked;
            NodeState::Tracked
        } else {
            self.lost_age += 1;
            if self.lost_age > max_lost_age {
                self.set_quit(QuitReason::AgedOut);
                NodeState::Quitted
            } else {
                self.nodes.last_mut().expect("non-empty").state = NodeState::Lost;
                NodeState::Lost
            }
        };
        Ok(next)
    }

    /// Rewrites the tracklet id and restamps every node with it.
    pub fn restamp(&mut self, new_id: i64) {
        self.tracklet_id = new_id;
        for n in &mut self.nodes {
            n.id = new_id;
        }
    }

    pub(crate) fn with_quit_reason(mut self, reason: Option<QuitReason>) -> Self {
        self.quit_reason = reason;
        self
    }
}

/// Monotone id source for newly created tracklets.
#[derive(Debug, Clone)]
pub struct IdGen {
    next: i64,
}

impl IdGen {
    pub fn starting_at(next: i64) -> Self {
        IdGen { next }
    }

    pub fn next_id(&mut self) -> i64 {
        let id = self.next;
        self.next += 1;
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(frame: u32) -> Tracklet {
        Tracklet::new(7, TrackNode::new(frame, 7, BBox::new(0.0, 0.0, 2.0, 2.0)))
    }

    #[test]
    fn unmatched_in_bounds_goes_lost() {
        let mut t = single(1);
        assert_eq!(t.advance_state(false, false, 30).unwrap(), NodeState::Lost);
        assert_eq!(t.state(), NodeState::Lost);
    }

    #[test]
    fn lost_then_matched_returns_to_tracked() {
        let mut t = single(1);
        t.advance_state(false, false, 30).unwrap();
        assert_eq!(t.advance_state(true, false, 30).unwrap(), NodeState::Tracked);
    }

    #[test]
    fn boundary_exit_quits_from_any_state() {
        let mut t = single(1);
        assert_eq!(t.advance_state(true, true, 30).unwrap(), NodeState::Quitted);
        assert_eq!(t.quit_reason(), Some(QuitReason::OutOfBounds));

        let mut t = single(1);
        t.advance_state(false, false, 30).unwrap();
        assert_eq!(t.advance_state(false, true, 30).unwrap(), NodeState::Quitted);
    }

    #[test]
    fn exceeding_the_lost_age_quits() {
        let mut t = single(1);
        for _ in 0..3 {
            assert_eq!(t.advance_state(false, false, 3).unwrap(), NodeState::Lost);
        }
        assert_eq!(t.advance_state(false, false, 3).unwrap(), NodeState::Quitted);
        assert_eq!(t.quit_reason(), Some(QuitReason::AgedOut));
    }

    #[test]
    fn quitted_is_terminal() {
        let mut t = single(1);
        t.advance_state(true, true, 30).unwrap();
        assert_eq!(t.advance_state(true, false, 30), Err(Error::TerminalState));
        assert!(t.push(TrackNode::new(2, 7, BBox::new(0.0, 0.0, 2.0, 2.0))).is_err());
    }

    #[test]
    fn frames_must_increase() {
        let mut t = single(5);
        let err = t.push(TrackNode::new(5, 7, BBox::new(0.0, 0.0, 2.0, 2.0)));
        assert_eq!(err, Err(Error::NonMonotonicFrames));

        let nodes = alloc::vec![
            TrackNode::new(3, 1, BBox::new(0.0, 0.0, 1.0, 1.0)),
            TrackNode::new(2, 1, BBox::new(0.0, 0.0, 1.0, 1.0)),
        ];
        assert_eq!(Tracklet::from_nodes(1, nodes), Err(Error::NonMonotonicFrames));
    }

    #[test]
    fn reachable_state_sequences_respect_the_transition_relation() {
        // Drive the machine through every input combination from every
        // reachable state and check the successor against the relation.
        use NodeState::*;
        for &(matched, exits) in
            &[(false, false), (true, false), (false, true), (true, true)]
        {
            for start_lost in [false, true] {
                let mut t = single(1);
                if start_lost {
                    t.advance_state(false, false, 30).unwrap();
                }
                let before = t.state();
                let after = t.advance_state(matched, exits, 30).unwrap();
                let legal = matches!(
                    (before, after),
                    (Tracked, Tracked)
                        | (Tracked, Lost)
                        | (Tracked, Quitted)
                        | (Lost, Tracked)
                        | (Lost, Lost)
                        | (Lost, Quitted)
                );
                assert!(legal, "illegal transition {before:?} -> {after:?}");
            }
        }
    }
}

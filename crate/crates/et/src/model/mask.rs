//! Causal attention mask over the concatenated [language, visual, action]
//! sequence.

use crate::nn::AttentionMask;

/// Mask over `[x₁..x_L, v₁..v_T, a₀..a_{T−1}]` (action stream position s
/// holds the action taken at step s; position 0 is the start token).
///
/// Language keys are visible to every query. Visual/action queries are
/// causal: the query for step t sees frames in the `history_frames` window
/// ending at t (its own frame always), and actions strictly before t within
/// the `history_actions` window. Language queries see only language unless
/// `lang_attends` opens the rest.
pub fn build_causal_mask(
    lang_len: usize,
    frames: usize,
    history_frames: Option<usize>,
    history_actions: Option<usize>,
    lang_attends: bool,
) -> AttentionMask {
    let total = lang_len + 2 * frames;
    let mut mask = AttentionMask::none(total, total);

    let frame_lo = |t: usize| match history_frames {
        // Window includes the current frame; a zero window degenerates to it.
        Some(k) => t.saturating_sub(k.max(1) - 1).max(1),
        None => 1,
    };
    let action_lo = |t: usize| match history_actions {
        Some(k) => t.saturating_sub(k),
        None => 0,
    };

    let vcol = |t: usize| lang_len + (t - 1);
    let acol = |s: usize| lang_len + frames + s;

    for q in 0..total {
        for x in 0..lang_len {
            mask.allow(q, x);
        }
    }
    if lang_attends {
        for q in 0..lang_len {
            for k in lang_len..total {
                mask.allow(q, k);
            }
        }
    }

    for t in 1..=frames {
        let vrow = vcol(t);
        for tp in frame_lo(t)..=t {
            mask.allow(vrow, vcol(tp));
        }
        if history_actions != Some(0) {
            for s in action_lo(t)..t {
                mask.allow(vrow, acol(s));
            }
        }
    }

    for s in 0..frames {
        let arow = acol(s);
        // The action at step s was chosen having seen frames ≤ s and the
        // actions in its own window, itself included.
        for tp in frame_lo(s.max(1))..=s {
            mask.allow(arow, vcol(tp));
        }
        for sp in action_lo(s)..=s {
            mask.allow(arow, acol(sp));
        }
    }

    mask
}

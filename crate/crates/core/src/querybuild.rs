//! Model input assembly: title, attribute and value knowledge in one token
//! sequence.
//!
//! The layout is always
//!
//! ```text
//! [CLS] title... [SEP] (knowledge token?) attribute... [SEP] (v1 [SEP] v2 ...)?
//! ```
//!
//! so gold span positions index the title segment identically in every mode:
//! the first title token sits at offset 1 and position 0 is `[CLS]`. Query
//! expansion appends the attribute's seen values in knowledge-base order,
//! budgeted; knowledge token mixing prepends `[SEEN]`/`[UNSEEN]` to the
//! attribute and pairs both variants of an example in the same mini-batch.

use crate::error::{Error, Result};
use crate::knowledge::{apply_dropout, DropoutConfig, KbValue, KnowledgeBase};
use crate::rng::SplitMix64;
use crate::spanlabel::LabeledExample;
use crate::tokenize::{TokenId, Vocabulary, CLS_ID, SEEN_ID, SEP_ID, UNSEEN_ID};
use serde::{Deserialize, Serialize};

/// Segment role of one input position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Title,
    Attr,
    Value,
    Special,
}

/// Knowledge status of an encoded input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeFlag {
    Seen,
    Unseen,
    None,
}

/// Input construction mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildMode {
    /// `[CLS] x [SEP] a [SEP]`, short query budget.
    Plain,
    /// Query expansion without a knowledge token.
    Vals,
    /// `[SEEN]` prepended to the attribute, values included.
    MixingSeen,
    /// `[UNSEEN]` prepended, no values.
    MixingUnseen,
}

/// Token budgets: the title cap and the query caps with and without value
/// expansion. The query region is everything after the first `[SEP]` except
/// the structural `[SEP]` that closes the attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    pub max_title: usize,
    pub plain_query: usize,
    pub vals_query: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            max_title: 64,
            plain_query: 32,
            vals_query: 192,
        }
    }
}

impl Budgets {
    pub fn query_budget(&self, mode: BuildMode) -> usize {
        match mode {
            BuildMode::Plain => self.plain_query,
            _ => self.vals_query,
        }
    }
}

/// Model variant switches. `drop` and `mixing` both require `vals`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub vals: bool,
    pub drop: bool,
    pub mixing: bool,
}

impl Variant {
    pub const PLAIN: Variant = Variant { vals: false, drop: false, mixing: false };

    pub fn validate(&self) -> Result<()> {
        if (self.drop || self.mixing) && !self.vals {
            return Err(Error::Config(
                "variant flags 'drop' and 'mixing' require 'vals'".to_string(),
            ));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        if !self.vals {
            return "plain".to_string();
        }
        let mut s = String::from("vals");
        if self.drop {
            s.push_str("+drop");
        }
        if self.mixing {
            s.push_str("+mixing");
        }
        s
    }
}

/// One encoded model input. `ids` and `roles` have equal length; title
/// tokens occupy positions `1..=title_len`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedInput {
    pub ids: Vec<TokenId>,
    pub roles: Vec<Role>,
    pub knowledge: KnowledgeFlag,
    pub title_len: usize,
    pub gold_begin: usize,
    pub gold_end: usize,
    /// Index of the source example within the batch that produced this
    /// input; the two mixing variants of an example share it.
    pub source: usize,
}

impl EncodedInput {
    /// Position of the first title token. The layout pins it.
    pub fn title_offset(&self) -> usize {
        1
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Title token ids, positions `1..=title_len`.
    pub fn title_ids(&self) -> &[TokenId] {
        &self.ids[1..=self.title_len]
    }

    /// Human-readable dump with role annotations, for debugging encoders.
    pub fn render(&self, vocab: &Vocabulary) -> String {
        let mut out = String::new();
        for (id, role) in self.ids.iter().zip(&self.roles) {
            let tag = match role {
                Role::Title => "T",
                Role::Attr => "A",
                Role::Value => "V",
                Role::Special => "S",
            };
            out.push_str(&format!("{}/{} ", vocab.surface(*id), tag));
        }
        out.push_str(&format!(
            "| knowledge={:?} gold=({},{})",
            self.knowledge, self.gold_begin, self.gold_end
        ));
        out
    }
}

/// Builds one encoded input. `kb_values` is the attribute's value list, in
/// knowledge-base order, possibly already dropout-transformed; it is ignored
/// in the modes that take no values.
pub fn build_input(
    example: &LabeledExample,
    kb_values: &[KbValue],
    mode: BuildMode,
    budgets: &Budgets,
    vocab: &Vocabulary,
) -> EncodedInput {
    let title_len = example.title_tokens.len().min(budgets.max_title);
    debug_assert!(
        example.gold_end <= title_len,
        "gold span must fit the truncated title"
    );

    let mut ids: Vec<TokenId> = Vec::with_capacity(title_len + 8);
    let mut roles: Vec<Role> = Vec::with_capacity(title_len + 8);
    ids.push(CLS_ID);
    roles.push(Role::Special);
    for tok in &example.title_tokens[..title_len] {
        ids.push(vocab.id(tok));
        roles.push(Role::Title);
    }
    ids.push(SEP_ID);
    roles.push(Role::Special);

    let budget = budgets.query_budget(mode);
    let mut used = 0usize;

    let knowledge = match mode {
        BuildMode::MixingSeen => {
            ids.push(SEEN_ID);
            roles.push(Role::Special);
            used += 1;
            KnowledgeFlag::Seen
        }
        BuildMode::MixingUnseen => {
            ids.push(UNSEEN_ID);
            roles.push(Role::Special);
            used += 1;
            KnowledgeFlag::Unseen
        }
        _ => KnowledgeFlag::None,
    };

    let attr_room = budget.saturating_sub(used);
    if example.attribute_tokens.len() > attr_room {
        log::warn!(
            "attribute {:?} exceeds the query budget; truncating to {} tokens",
            example.attribute_tokens.join(" "),
            attr_room
        );
    }
    for tok in example.attribute_tokens.iter().take(attr_room) {
        ids.push(vocab.id(tok));
        roles.push(Role::Attr);
        used += 1;
    }
    ids.push(SEP_ID);
    roles.push(Role::Special);

    if matches!(mode, BuildMode::Vals | BuildMode::MixingSeen) && !kb_values.is_empty() {
        let room = budget.saturating_sub(used);
        let mut stream: Vec<(TokenId, Role)> = Vec::new();
        for (i, value) in kb_values.iter().enumerate() {
            if i > 0 {
                stream.push((SEP_ID, Role::Special));
            }
            for tok in &value.tokens {
                stream.push((vocab.id(tok), Role::Value));
            }
        }
        // Over-budget value lists are cut mid-value, not at value borders.
        stream.truncate(room);
        for (id, role) in stream {
            ids.push(id);
            roles.push(role);
        }
    }

    EncodedInput {
        ids,
        roles,
        knowledge,
        title_len,
        gold_begin: example.gold_begin,
        gold_end: example.gold_end,
        source: 0,
    }
}

/// Mini-batch shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSpec {
    pub batch_size: usize,
    pub mixing: bool,
}

impl BatchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".to_string()));
        }
        if self.mixing && self.batch_size < 2 {
            return Err(Error::Config(
                "batch size must be at least 2 when mixing is enabled".to_string(),
            ));
        }
        Ok(())
    }

    /// Number of source examples that fill one batch.
    pub fn sources_per_batch(&self) -> usize {
        if self.mixing {
            (self.batch_size / 2).max(1)
        } else {
            self.batch_size
        }
    }
}

/// Builds the encoded inputs of one training mini-batch from its source
/// examples. With mixing, every example contributes a `[SEEN]` input (values
/// with dropout freshly applied) and an `[UNSEEN]` input (no values), both
/// in this batch. Without mixing, each example contributes one input in the
/// variant's mode, with dropout applied when enabled.
pub fn make_mixed_batch(
    examples: &[LabeledExample],
    kb: &KnowledgeBase,
    variant: &Variant,
    dropout: &DropoutConfig,
    budgets: &Budgets,
    vocab: &Vocabulary,
    rng: &mut SplitMix64,
) -> Vec<EncodedInput> {
    let mut batch = Vec::with_capacity(examples.len() * if variant.mixing { 2 } else { 1 });
    for (source, example) in examples.iter().enumerate() {
        let attribute = example.attribute_tokens.join(" ");
        let values = kb.values(&attribute);
        let dropped;
        let effective: &[KbValue] = if variant.drop {
            dropped = apply_dropout(values, dropout, rng);
            &dropped
        } else {
            values
        };

        if variant.mixing {
            let mut seen = build_input(example, effective, BuildMode::MixingSeen, budgets, vocab);
            seen.source = source;
            let mut unseen =
                build_input(example, &[], BuildMode::MixingUnseen, budgets, vocab);
            unseen.source = source;
            batch.push(seen);
            batch.push(unseen);
        } else {
            let mode = if variant.vals { BuildMode::Vals } else { BuildMode::Plain };
            let mut input = build_input(example, effective, mode, budgets, vocab);
            input.source = source;
            batch.push(input);
        }
    }
    batch
}

/// Builds the evaluation-time input for a mixing-trained model: `[SEEN]`
/// with the attribute's values when the knowledge base has any, `[UNSEEN]`
/// without values otherwise. No dropout is applied at evaluation.
pub fn build_eval_input(
    example: &LabeledExample,
    kb: &KnowledgeBase,
    budgets: &Budgets,
    vocab: &Vocabulary,
) -> EncodedInput {
    let attribute = example.attribute_tokens.join(" ");
    let values = kb.values(&attribute);
    if values.is_empty() {
        build_input(example, &[], BuildMode::MixingUnseen, budgets, vocab)
    } else {
        build_input(example, values, BuildMode::MixingSeen, budgets, vocab)
    }
}

/// Evaluation-time encoding for any variant: plain and vals variants reuse
/// their training layout (without dropout); mixing variants use
/// [`build_eval_input`].
pub fn encode_for_eval(
    example: &LabeledExample,
    kb: &KnowledgeBase,
    variant: &Variant,
    budgets: &Budgets,
    vocab: &Vocabulary,
) -> EncodedInput {
    if variant.mixing {
        build_eval_input(example, kb, budgets, vocab)
    } else if variant.vals {
        let attribute = example.attribute_tokens.join(" ");
        build_input(example, kb.values(&attribute), BuildMode::Vals, budgets, vocab)
    } else {
        build_input(example, &[], BuildMode::Plain, budgets, vocab)
    }
}

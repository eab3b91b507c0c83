//! The scripted auxiliary model: a deterministic, template-based rewriter
//! that plays the instruction-following model in fully offline runs.
//!
//! The same transform engine drives both sides of the synthetic harness:
//! the scenario builder launders corpora with it, and the audit pipeline
//! uses it as the auxiliary backend. A rewrite is a pure function of
//! (register, detail rules, text), so surrogates synthesized at audit time
//! coincide with the laundered texts a simulated target was trained on.
//!
//! The transform for register `r` on text `t`:
//! 1. opening: `r`'s opening template with every bracketed placeholder
//!    filled by a content word of `t`'s first sentence followed by `r`'s
//!    filler word;
//! 2. body: every sentence of `t` opened with `r`'s connective phrase and
//!    its tokens interleaved with `r`'s filler;
//! 3. detail rules decorate the body (openings stay rule-free so the
//!    stage-1 template probe is independent of stage-2 details).
//!
//! Interleaving breaks every adjacent token pair of the original, which is
//! what makes detection on originals collapse after laundering; the
//! register-specific filler makes wrong-register surrogates miss the
//! trained chains.

use serde::{Deserialize, Serialize};

use crate::corpus::{first_sentence, split_sentences};
use crate::error::{Error, Result};
use crate::gateway::tokenizer::tokenize;
use crate::gateway::{Backend, BackendKind, Capabilities, Continuation, TokenScore};
use crate::prompt::RewritePrompt;
use crate::registers;

pub const SCRIPTED_MODEL_ID: &str = "scripted-aux-v1";

/// Instruction forms the scripted model understands. The search pipeline
/// composes exactly these; a live auxiliary model receives them verbatim.
pub const PROMPT_REQUEST_PREFIX: &str = "Give me a prompt that can transfer text into register ";
pub const TEMPLATE_EXTRACT_INSTRUCTION: &str = "Extract a common template.";
pub const PROMPT_EXTRACT_INSTRUCTION: &str = "Extract a common prompt.";
pub const FILL_INSTRUCTION_PREFIX: &str = "Rewrite the text as the following opening template, filling each bracketed placeholder with content from the text: ";
pub const EDIT_INSTRUCTION: &str = "Describe the prompt edit that enables the transformation of the first text into the second text.";

/// A scripted fine-grained detail of the laundering transformation, beyond
/// the register shift itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetailRule {
    /// Insert a fixed rotation of imagery adjectives before every third
    /// body word.
    VividImagery,
}

const IMAGERY_ADJECTIVES: &[&str] = &[
    "shimmering",
    "luminous",
    "radiant",
    "gilded",
    "crystalline",
    "opalescent",
];
const IMAGERY_PERIOD: usize = 3;

impl DetailRule {
    pub fn all() -> &'static [DetailRule] {
        &[DetailRule::VividImagery]
    }

    /// Clause appended to a prompt to request this detail.
    pub fn prompt_clause(&self) -> &'static str {
        match self {
            DetailRule::VividImagery => ", ensuring the imagery is vivid",
        }
    }

    fn trigger_phrases(&self) -> &'static [&'static str] {
        match self {
            DetailRule::VividImagery => &["imagery is vivid", "vivid imagery"],
        }
    }

    fn markers(&self) -> &'static [&'static str] {
        match self {
            DetailRule::VividImagery => IMAGERY_ADJECTIVES,
        }
    }
}

struct Voice {
    register_id: u8,
    keyphrase: &'static str,
    connective: &'static str,
    filler: &'static str,
}

// Fillers are register-unique and cannot collide with generated corpus
// words (those are consonant-initial CV syllable strings; fillers start
// with a vowel or contain letters outside the generator alphabet).
const VOICES: &[Voice] = &[
    Voice { register_id: 1, keyphrase: "lyrical style", connective: "and the verse recalls", filler: "echoes" },
    Voice { register_id: 2, keyphrase: "encyclopedia entry", connective: "the entry records that", filler: "cited" },
    Voice { register_id: 3, keyphrase: "spoken style", connective: "so anyway, you know,", filler: "uh" },
    Voice { register_id: 4, keyphrase: "research article", connective: "the findings indicate that", filler: "hence" },
    Voice { register_id: 5, keyphrase: "form of an interview", connective: "and the guest explains that", filler: "asked" },
    Voice { register_id: 6, keyphrase: "descriptive profile", connective: "notably, it presents", filler: "known" },
    Voice { register_id: 7, keyphrase: "interactive discussion", connective: "and another voice adds that", filler: "okay" },
    Voice { register_id: 8, keyphrase: "frequently asked questions", connective: "question: what follows? answer:", filler: "answered" },
    Voice { register_id: 9, keyphrase: "storytelling narrative", connective: "and so the story goes that", filler: "then" },
    Voice { register_id: 10, keyphrase: "legal terms and conditions", connective: "clause: it is agreed that", filler: "hereby" },
    Voice { register_id: 11, keyphrase: "news report", connective: "officials further report that", filler: "today" },
    Voice { register_id: 12, keyphrase: "personal opinion piece", connective: "i would argue that", filler: "honestly" },
    Voice { register_id: 13, keyphrase: "sports report", connective: "and the play continues as", filler: "quickly" },
    Voice { register_id: 14, keyphrase: "as a review", connective: "on balance, the review finds", filler: "overall" },
    Voice { register_id: 15, keyphrase: "narrative blog post", connective: "later in that chapter,", filler: "along" },
    Voice { register_id: 16, keyphrase: "opinion blog post", connective: "and honestly, i think", filler: "frankly" },
    Voice { register_id: 17, keyphrase: "step-by-step instructional guide", connective: "step: proceed to", filler: "next" },
    Voice { register_id: 18, keyphrase: "religious sermon", connective: "let us reflect that", filler: "amen" },
    Voice { register_id: 19, keyphrase: "as a recipe", connective: "next, stir in", filler: "whisk" },
    Voice { register_id: 20, keyphrase: "sales description", connective: "better yet, it delivers", filler: "offer" },
    Voice { register_id: 21, keyphrase: "persuade the reader through factual information", connective: "the figures confirm that", filler: "indeed" },
    Voice { register_id: 22, keyphrase: "informational description", connective: "in particular, it covers", filler: "namely" },
    Voice { register_id: 23, keyphrase: "style of an editorial", connective: "the editorial maintains that", filler: "clearly" },
];

fn voice(register_id: u8) -> &'static Voice {
    VOICES
        .iter()
        .find(|v| v.register_id == register_id)
        .expect("voice table covers all 23 registers")
}

const STOPWORDS: &[&str] = &[
    "the", "and", "for", "that", "with", "this", "from", "are", "was", "has", "have", "its",
    "into", "their", "about", "will", "but", "not", "you", "can",
];

/// Content words of a text: alphanumeric tokens of length >= 3 that are
/// neither stopwords nor scripted scaffolding vocabulary.
pub fn content_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for token in tokenize(text) {
        if token.chars().count() < 3 || !token.chars().all(|c| c.is_alphanumeric()) {
            continue;
        }
        if STOPWORDS.contains(&token.as_str()) {
            continue;
        }
        if VOICES.iter().any(|v| v.filler == token) || IMAGERY_ADJECTIVES.contains(&token.as_str())
        {
            continue;
        }
        out.push(token);
    }
    if out.is_empty() {
        out.push("topic".to_string());
    }
    out
}

/// Instantiate an opening template: placeholder `i` becomes the `i`-th
/// content word of `source_text` (cycling) followed by the register's
/// filler. The filler suffix keeps the trailing token pair of every
/// register's opening distinct.
pub fn fill_template(template: &str, source_text: &str, register_id: u8) -> String {
    let words = content_words(source_text);
    let filler = voice(register_id).filler;
    let mut out = String::new();
    let mut rest = template;
    let mut index = 0usize;
    while let Some(open) = rest.find('[') {
        match rest[open..].find(']') {
            Some(close_rel) => {
                out.push_str(&rest[..open]);
                out.push_str(&words[index % words.len()]);
                out.push(' ');
                out.push_str(filler);
                index += 1;
                rest = &rest[open + close_rel + 1..];
            }
            None => break,
        }
    }
    out.push_str(rest);
    out
}

/// The deterministic laundering transform for one register plus optional
/// detail rules. Pure in all arguments.
pub fn scripted_transform(register_id: u8, details: &[DetailRule], text: &str) -> String {
    let template = registers::fixture_template(register_id)
        .expect("register id within catalog")
        .template_text;
    let opening = fill_template(&template, first_sentence(text), register_id);
    let v = voice(register_id);

    let mut parts = vec![opening];
    let mut detail_counter = 0usize;
    let mut inserted = 0usize;
    for sentence in split_sentences(text) {
        let tokens = tokenize(sentence);
        let mut body: Vec<String> = Vec::with_capacity(tokens.len() * 2 + 4);
        body.extend(tokenize(v.connective));
        for (i, token) in tokens.iter().enumerate() {
            if i > 0 {
                body.push(v.filler.to_string());
            }
            let is_word = token.chars().all(|c| c.is_alphanumeric());
            if is_word {
                detail_counter += 1;
                if details.contains(&DetailRule::VividImagery)
                    && detail_counter % IMAGERY_PERIOD == 0
                {
                    body.push(IMAGERY_ADJECTIVES[inserted % IMAGERY_ADJECTIVES.len()].to_string());
                    inserted += 1;
                }
            }
            body.push(token.clone());
        }
        parts.push(body.join(" "));
    }
    parts.join(" ")
}

/// Recover (register, detail rules) from a prompt's text, the inverse of
/// the prompt fixtures plus detail clauses. Returns `None` for the register
/// when no keyphrase matches, in which case the scripted model rewrites
/// text as itself.
pub fn parse_prompt(prompt_text: &str) -> (Option<u8>, Vec<DetailRule>) {
    let lowered = prompt_text.to_lowercase();
    let mut best: Option<(&Voice, usize)> = None;
    for v in VOICES {
        if lowered.contains(v.keyphrase) {
            let better = match best {
                None => true,
                Some((b, len)) => {
                    v.keyphrase.len() > len
                        || (v.keyphrase.len() == len && v.register_id < b.register_id)
                }
            };
            if better {
                best = Some((v, v.keyphrase.len()));
            }
        }
    }
    let details = DetailRule::all()
        .iter()
        .copied()
        .filter(|rule| rule.trigger_phrases().iter().any(|p| lowered.contains(p)))
        .collect();
    (best.map(|(v, _)| v.register_id), details)
}

/// Append a detail clause to a prompt text unless already requested.
pub fn append_detail(prompt_text: &str, rule: DetailRule) -> String {
    let (_, present) = parse_prompt(prompt_text);
    if present.contains(&rule) {
        return prompt_text.to_string();
    }
    let trimmed = prompt_text.trim_end();
    let (body, terminal) = match trimmed.strip_suffix('.') {
        Some(body) => (body, "."),
        None => (trimmed, ""),
    };
    format!("{}{}{}", body, rule.prompt_clause(), terminal)
}

fn constant_segments(template: &str) -> Vec<&str> {
    let mut segments = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('[') {
        match rest[open..].find(']') {
            Some(close_rel) => {
                segments.push(&rest[..open]);
                rest = &rest[open + close_rel + 1..];
            }
            None => break,
        }
    }
    segments.push(rest);
    segments
}

// How much of a template's constant skeleton an opening instantiates.
// Openings are first sentences of full rewrites, so they may stop partway
// through a multi-sentence template; matching is prefix-tolerant.
fn skeleton_score(opening: &str, segments: &[&str]) -> usize {
    let mut score = 0usize;
    let mut pos = 0usize;
    for (i, segment) in segments.iter().enumerate() {
        if segment.is_empty() {
            continue;
        }
        match opening[pos..].find(segment) {
            Some(offset) => {
                if i == 0 && offset != 0 {
                    return 0;
                }
                pos += offset + segment.len();
                score += segment.len();
            }
            None => break,
        }
    }
    score
}

// The sparsest fixture skeleton (news report) totals 7 constant chars.
const SKELETON_SCORE_FLOOR: usize = 6;

/// Common-template extraction: prefer the fixture whose skeleton the
/// openings instantiate; otherwise fall back to the literal shared prefix
/// with a placeholder suffix.
pub fn extract_template(openings: &[String]) -> String {
    let mut best: Option<(u8, usize)> = None;
    for register in registers::catalog() {
        let template = registers::fixture_template(register.id)
            .expect("catalog template")
            .template_text;
        let segments = constant_segments(&template);
        let score = openings
            .iter()
            .map(|o| skeleton_score(o, &segments))
            .min()
            .unwrap_or(0);
        if score >= SKELETON_SCORE_FLOOR {
            let better = match best {
                None => true,
                Some((_, s)) => score > s,
            };
            if better {
                best = Some((register.id, score));
            }
        }
    }
    if let Some((id, _)) = best {
        return registers::fixture_template(id).unwrap().template_text;
    }
    let mut prefix = openings.first().cloned().unwrap_or_default();
    for opening in &openings[1..] {
        let common = prefix
            .char_indices()
            .zip(opening.chars())
            .take_while(|((_, a), b)| a == b)
            .map(|((i, a), _)| i + a.len_utf8())
            .last()
            .unwrap_or(0);
        prefix.truncate(common);
    }
    format!("{} [...]", prefix.trim_end())
}

/// The scripted auxiliary backend.
pub struct ScriptedAux;

impl ScriptedAux {
    pub fn new() -> Self {
        ScriptedAux
    }
}

impl Default for ScriptedAux {
    fn default() -> Self {
        ScriptedAux::new()
    }
}

impl Backend for ScriptedAux {
    fn kind(&self) -> BackendKind {
        BackendKind::ScriptedAux
    }

    fn model_id(&self) -> &str {
        SCRIPTED_MODEL_ID
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            rewrite: true,
            ..Default::default()
        }
    }

    fn score_tokens(&self, _: &str, _: Option<&str>) -> Result<Vec<TokenScore>> {
        Err(Error::MissingCapability {
            model_id: SCRIPTED_MODEL_ID.into(),
            capability: "token-logprobs",
            operation: "score_tokens",
        })
    }

    fn generate(&self, _: &str, _: usize) -> Result<Continuation> {
        Err(Error::MissingCapability {
            model_id: SCRIPTED_MODEL_ID.into(),
            capability: "continuation",
            operation: "generate_continuation",
        })
    }

    fn rewrite(&self, prompt: &RewritePrompt, text: &str) -> Result<String> {
        let (register, details) = parse_prompt(&prompt.text);
        Ok(match register {
            Some(id) => scripted_transform(id, &details, text),
            None => text.to_string(),
        })
    }

    fn instruct(&self, instruction: &str, materials: &[String]) -> Result<String> {
        if let Some(name) = instruction.strip_prefix(PROMPT_REQUEST_PREFIX) {
            let name = name.trim().trim_end_matches('.').to_lowercase();
            let register = registers::catalog()
                .into_iter()
                .find(|r| r.name.to_lowercase() == name)
                .ok_or_else(|| Error::Validation(format!("unknown register '{name}'")))?;
            return Ok(registers::fixture_standard_prompt_text(register.id)
                .unwrap()
                .to_string());
        }
        if instruction == TEMPLATE_EXTRACT_INSTRUCTION {
            return Ok(extract_template(materials));
        }
        if let Some(template) = instruction.strip_prefix(FILL_INSTRUCTION_PREFIX) {
            let source = materials
                .first()
                .ok_or_else(|| Error::Validation("template fill needs a source text".into()))?;
            // Reject templates without placeholders up front; filling them
            // would silently echo the template.
            if !registers::has_placeholder(template) {
                return Err(Error::Validation(
                    "fill instruction carries no placeholder".into(),
                ));
            }
            let (register, _) = parse_template_register(template);
            return Ok(fill_template(template, source, register));
        }
        if instruction == EDIT_INSTRUCTION {
            if materials.len() != 3 {
                return Err(Error::Validation(
                    "edit analysis expects [prompt, rewrite, continuation]".into(),
                ));
            }
            let prompt_text = &materials[0];
            let rewrite_tokens = tokenize(&materials[1]);
            let continuation_tokens = tokenize(&materials[2]);
            for rule in DetailRule::all() {
                let in_continuation = rule
                    .markers()
                    .iter()
                    .any(|m| continuation_tokens.iter().any(|t| t == m));
                let in_rewrite = rule
                    .markers()
                    .iter()
                    .any(|m| rewrite_tokens.iter().any(|t| t == m));
                if in_continuation && !in_rewrite {
                    return Ok(append_detail(prompt_text, *rule));
                }
            }
            return Ok(prompt_text.clone());
        }
        if instruction == PROMPT_EXTRACT_INSTRUCTION {
            // Majority candidate; ties break lexicographically.
            let mut counts: std::collections::BTreeMap<&String, usize> =
                std::collections::BTreeMap::new();
            for m in materials {
                *counts.entry(m).or_insert(0) += 1;
            }
            let best = counts
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
                .map(|(text, _)| text.clone())
                .ok_or_else(|| Error::Validation("no candidate prompts to distill".into()))?;
            return Ok(best);
        }
        Err(Error::Validation(format!(
            "scripted auxiliary cannot follow instruction: {instruction}"
        )))
    }
}

// Which register's fixture a raw template text belongs to; falls back to
// register 1 for foreign templates (only the filler choice depends on it).
fn parse_template_register(template: &str) -> (u8, bool) {
    for register in registers::catalog() {
        let fixture = registers::fixture_template(register.id).unwrap();
        if fixture.template_text == template.trim() {
            return (register.id, true);
        }
    }
    (1, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str =
        "the marble harbor sheltered seven trading vessels. each captain carried sealed ledgers.";

    #[test]
    fn lyrical_rewrite_opens_with_the_register_pattern() {
        let out = scripted_transform(1, &[], SAMPLE);
        assert!(out.starts_with("In the heart of marble echoes, a tale unfolds"));
        assert!(out.contains("and the verse recalls"));
    }

    #[test]
    fn transform_is_deterministic_and_register_specific() {
        let a = scripted_transform(1, &[], SAMPLE);
        let b = scripted_transform(1, &[], SAMPLE);
        assert_eq!(a, b);
        let c = scripted_transform(11, &[], SAMPLE);
        assert_ne!(a, c);
        assert!(c.contains("officials further report that"));
    }

    #[test]
    fn interleaving_breaks_adjacent_pairs() {
        let out = scripted_transform(1, &[], "alpha beta gamma.");
        let tokens = tokenize(&out);
        // No adjacent original pair survives in the body.
        for pair in [("alpha", "beta"), ("beta", "gamma")] {
            let found = tokens
                .windows(2)
                .any(|w| w[0] == pair.0 && w[1] == pair.1);
            assert!(!found, "pair {pair:?} survived laundering");
        }
    }

    #[test]
    fn detail_rule_inserts_imagery_adjectives() {
        let plain = scripted_transform(1, &[], SAMPLE);
        let vivid = scripted_transform(1, &[DetailRule::VividImagery], SAMPLE);
        assert!(!IMAGERY_ADJECTIVES.iter().any(|a| plain.contains(a)));
        assert!(IMAGERY_ADJECTIVES.iter().any(|a| vivid.contains(a)));
        // Openings stay rule-free.
        let first_plain = first_sentence(&plain);
        let first_vivid = first_sentence(&vivid);
        assert_eq!(first_plain, first_vivid);
    }

    #[test]
    fn parse_prompt_round_trips_all_registers() {
        for register in registers::catalog() {
            let text = registers::fixture_standard_prompt_text(register.id).unwrap();
            let (parsed, details) = parse_prompt(text);
            assert_eq!(parsed, Some(register.id), "register {}", register.id);
            assert!(details.is_empty(), "register {}", register.id);
        }
    }

    #[test]
    fn parse_prompt_detects_detail_clause() {
        let base = registers::fixture_standard_prompt_text(1).unwrap();
        let refined = append_detail(base, DetailRule::VividImagery);
        let (register, details) = parse_prompt(&refined);
        assert_eq!(register, Some(1));
        assert_eq!(details, vec![DetailRule::VividImagery]);
        // Appending twice is a no-op.
        assert_eq!(append_detail(&refined, DetailRule::VividImagery), refined);
    }

    #[test]
    fn unknown_prompt_is_identity() {
        let aux = ScriptedAux::new();
        let prompt = RewritePrompt::standard("Keep the text exactly as it is.", None);
        assert_eq!(aux.rewrite(&prompt, SAMPLE).unwrap(), SAMPLE);
    }

    #[test]
    fn standard_prompt_request_returns_fixture() {
        let aux = ScriptedAux::new();
        let out = aux
            .instruct(
                &format!("{PROMPT_REQUEST_PREFIX}lyrical"),
                &["lyrical".to_string()],
            )
            .unwrap();
        assert!(out.starts_with("Rewrite the text in a lyrical style"));
    }

    #[test]
    fn template_extraction_recovers_each_fixture() {
        let docs = [
            "the marble harbor sheltered seven trading vessels near the tall cliffs. each captain carried ledgers.",
            "a copper bell tolled over the quiet garden while three scholars debated. nobody wrote anything down.",
            "fresh timber arrived along the river road before dawn on market day. porters stacked it in rows.",
        ];
        for register in registers::catalog() {
            let openings: Vec<String> = docs
                .iter()
                .map(|d| first_sentence(&scripted_transform(register.id, &[], d)).to_string())
                .collect();
            let extracted = extract_template(&openings);
            let fixture = registers::fixture_template(register.id).unwrap().template_text;
            assert_eq!(extracted, fixture, "register {}", register.id);
        }
    }

    #[test]
    fn template_extraction_falls_back_to_shared_prefix() {
        let openings = vec![
            "Dear diary, the fleet sailed west.".to_string(),
            "Dear diary, the fleet never returned.".to_string(),
        ];
        let out = extract_template(&openings);
        assert_eq!(out, "Dear diary, the fleet [...]");
        assert!(registers::has_placeholder(&out));
    }

    #[test]
    fn fill_instruction_fills_from_the_source() {
        let aux = ScriptedAux::new();
        let template = registers::fixture_template(3).unwrap().template_text;
        let out = aux
            .instruct(
                &format!("{FILL_INSTRUCTION_PREFIX}{template}"),
                &["the marble harbor sheltered vessels.".to_string()],
            )
            .unwrap();
        assert_eq!(out, "So, let's talk about marble uh.");
    }

    #[test]
    fn fill_matches_the_laundering_opening() {
        // The audit-time template fill must reproduce the opening the
        // launderer produced for the same document.
        for register in registers::catalog() {
            let laundered = scripted_transform(register.id, &[], SAMPLE);
            let template = registers::fixture_template(register.id).unwrap().template_text;
            let filled = fill_template(&template, first_sentence(SAMPLE), register.id);
            assert!(
                laundered.starts_with(&filled),
                "register {} opening mismatch",
                register.id
            );
        }
    }

    #[test]
    fn edit_instruction_spots_missing_detail() {
        let aux = ScriptedAux::new();
        let base = registers::fixture_standard_prompt_text(1).unwrap().to_string();
        let rewrite = scripted_transform(1, &[], SAMPLE);
        let continuation = scripted_transform(1, &[DetailRule::VividImagery], SAMPLE);
        let suggestion = aux
            .instruct(
                EDIT_INSTRUCTION,
                &[base.clone(), rewrite.clone(), continuation],
            )
            .unwrap();
        assert_eq!(suggestion, append_detail(&base, DetailRule::VividImagery));
        // Nothing missing: the suggestion is the unchanged prompt.
        let unchanged = aux
            .instruct(EDIT_INSTRUCTION, &[base.clone(), rewrite.clone(), rewrite])
            .unwrap();
        assert_eq!(unchanged, base);
    }

    #[test]
    fn prompt_distillation_takes_the_majority() {
        let aux = ScriptedAux::new();
        let h = vec!["b".to_string(), "a".to_string(), "b".to_string()];
        assert_eq!(aux.instruct(PROMPT_EXTRACT_INSTRUCTION, &h).unwrap(), "b");
        // Singleton distillation is the element itself.
        let single = vec!["only".to_string()];
        assert_eq!(
            aux.instruct(PROMPT_EXTRACT_INSTRUCTION, &single).unwrap(),
            "only"
        );
        // Ties break toward the lexicographically smaller candidate.
        let tied = vec!["b".to_string(), "a".to_string()];
        assert_eq!(aux.instruct(PROMPT_EXTRACT_INSTRUCTION, &tied).unwrap(), "a");
    }

    #[test]
    fn content_words_skip_stopwords_and_scaffolding() {
        let words = content_words("the echoes of marble and shimmering harbors");
        assert_eq!(words, vec!["marble", "harbors"]);
        // Never empty.
        assert_eq!(content_words("of the an"), vec!["topic"]);
    }
}

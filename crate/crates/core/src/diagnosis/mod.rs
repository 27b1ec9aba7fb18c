//! Two-step cause estimation.
//!
//! Step 1 asks the oracle what damage the image of interest shows and which
//! member carries it. Step 2 takes every rule triggered by that damage and,
//! for each analysed image (the interest image and its surrounding images),
//! asks whether the rule's related member is visible; if so, it asks about
//! the rule's events on that member. `N` counts images showing the member,
//! `M` counts those also showing at least one event, and causes are ranked
//! by `M / N`.
//!
//! Counting is per image: an image adds at most one to `N` and one to `M`
//! for each rule. A failed question is recorded in the transcript and taken
//! as "no".

mod report;
mod rules;

pub use report::{
    format_ratio, rank_evidence, CauseEvidence, ConfigEcho, DiagnosisReport, EventMode, Stage,
    TranscriptEntry,
};
pub use rules::{default_rules, parse_rules, validate_rules, CauseRule};

use thiserror::Error;

use crate::ingest::Scene;
use crate::neighborhood::{
    select_surrounding, shooting_points_with_workers, NeighborhoodError, NeighborhoodSelection,
    DEFAULT_RADIUS,
};
use crate::par::map_ordered;
use crate::vqa::{render_question, AnswerOracle, OracleError, Slots, TemplateId, Vocabulary};

#[derive(Debug, Error)]
pub enum DiagnosisError {
    #[error(transparent)]
    Neighborhood(#[from] NeighborhoodError),
    #[error("identifying the damage on {image_id:?} failed: {reason}")]
    Identification {
        image_id: String,
        reason: String,
        /// The oracle itself failed, as opposed to replying off-type.
        oracle_failure: Option<OracleError>,
        transcript: Vec<TranscriptEntry>,
    },
    #[error("rule {index} ({cause_name:?}): {message}")]
    Rule {
        index: usize,
        cause_name: String,
        message: String,
    },
    #[error("rule file: {0}")]
    RuleSyntax(serde_json::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseOptions {
    pub radius: f64,
    /// Worker threads for ray casting and per-image questioning.
    pub concurrency: usize,
    pub event_mode: EventMode,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self {
            radius: DEFAULT_RADIUS,
            concurrency: 1,
            event_mode: EventMode::ShortCircuit,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Identification {
    pub damage: String,
    pub member: String,
    pub transcript: Vec<TranscriptEntry>,
}

/// Step 1: what damage is in the image of interest, and on which member.
pub fn identify_damage_and_member(
    oracle: &dyn AnswerOracle,
    vocab: &Vocabulary,
    interest_image: &str,
) -> Result<Identification, DiagnosisError> {
    let mut transcript = Vec::new();

    let damage = ask_name(
        oracle,
        interest_image,
        TemplateId::WhatDamageInImage,
        Slots::none(),
        &mut transcript,
    )
    .and_then(|d| {
        vocab
            .damage(&d)
            .map(str::to_string)
            .ok_or_else(|| (format!("expected a damage name, got {d:?}"), None))
    });
    let damage = match damage {
        Ok(d) => d,
        Err((reason, oracle_failure)) => {
            return Err(DiagnosisError::Identification {
                image_id: interest_image.to_string(),
                reason,
                oracle_failure,
                transcript,
            })
        }
    };

    let member = ask_name(
        oracle,
        interest_image,
        TemplateId::WhichMemberHasDamage,
        Slots::damage(&damage),
        &mut transcript,
    )
    .and_then(|m| {
        vocab
            .member(&m)
            .map(str::to_string)
            .ok_or_else(|| (format!("expected a member name, got {m:?}"), None))
    });
    match member {
        Ok(member) => Ok(Identification {
            damage,
            member,
            transcript,
        }),
        Err((reason, oracle_failure)) => Err(DiagnosisError::Identification {
            image_id: interest_image.to_string(),
            reason,
            oracle_failure,
            transcript,
        }),
    }
}

fn ask_name(
    oracle: &dyn AnswerOracle,
    image_id: &str,
    template: TemplateId,
    slots: Slots,
    transcript: &mut Vec<TranscriptEntry>,
) -> Result<String, (String, Option<OracleError>)> {
    let question = render_question(template, &slots).expect("slots filled");
    let result = oracle.answer(image_id, &question);
    let mut entry = TranscriptEntry {
        stage: Stage::Identify,
        image_id: image_id.to_string(),
        cause_name: None,
        template_id: template,
        question: question.text,
        answer: None,
        confidence: None,
        error: None,
    };
    let out = match result {
        Ok(a) => {
            entry.answer = Some(a.value.clone());
            entry.confidence = a.confidence;
            Ok(a.value)
        }
        Err(e) => {
            entry.error = Some(e.to_string());
            Err((e.to_string(), Some(e)))
        }
    };
    transcript.push(entry);
    out
}

/// What one image contributed to one rule.
#[derive(Debug, Clone, PartialEq)]
struct ImageOutcome {
    member_seen: bool,
    event_seen: bool,
    degraded: usize,
    transcript: Vec<TranscriptEntry>,
}

/// Asks a yes/no question; failures and off-type replies count as "no".
fn ask_yes_no(
    oracle: &dyn AnswerOracle,
    image_id: &str,
    rule: &CauseRule,
    template: TemplateId,
    slots: Slots,
    outcome: &mut ImageOutcome,
) -> bool {
    let question = render_question(template, &slots).expect("slots filled");
    let mut entry = TranscriptEntry {
        stage: Stage::Evidence,
        image_id: image_id.to_string(),
        cause_name: Some(rule.cause_name.clone()),
        template_id: template,
        question: question.text.clone(),
        answer: None,
        confidence: None,
        error: None,
    };
    match oracle.answer(image_id, &question) {
        Ok(a) => {
            if !(a.is_yes() || a.is_no()) {
                entry.error = Some(format!("expected yes or no, got {:?}", a.value));
            }
            entry.answer = Some(a.value);
            entry.confidence = a.confidence;
        }
        Err(e) => entry.error = Some(e.to_string()),
    }
    if entry.error.is_some() {
        outcome.degraded += 1;
    }
    let yes = entry.answered_yes();
    outcome.transcript.push(entry);
    yes
}

fn evaluate_image(
    oracle: &dyn AnswerOracle,
    image_id: &str,
    rule: &CauseRule,
    mode: EventMode,
) -> ImageOutcome {
    let mut outcome = ImageOutcome {
        member_seen: false,
        event_seen: false,
        degraded: 0,
        transcript: Vec::new(),
    };
    outcome.member_seen = ask_yes_no(
        oracle,
        image_id,
        rule,
        TemplateId::MemberPresent,
        Slots::member(&rule.related_member),
        &mut outcome,
    );
    if !outcome.member_seen {
        return outcome;
    }
    for event in &rule.events {
        let yes = ask_yes_no(
            oracle,
            image_id,
            rule,
            TemplateId::DamageOnMember,
            Slots::both(event, &rule.related_member),
            &mut outcome,
        );
        outcome.event_seen |= yes;
        if yes && mode == EventMode::ShortCircuit {
            break;
        }
    }
    outcome
}

/// Result of evaluating one rule over a set of images.
#[derive(Debug, Clone, PartialEq)]
pub struct CauseEvaluation {
    pub evidence: CauseEvidence,
    pub transcript: Vec<TranscriptEntry>,
}

/// Step 2 for a single rule over `images`.
pub fn evaluate_cause(
    oracle: &dyn AnswerOracle,
    images: &[String],
    rule: &CauseRule,
    mode: EventMode,
) -> CauseEvaluation {
    let outcomes: Vec<ImageOutcome> = images
        .iter()
        .map(|id| evaluate_image(oracle, id, rule, mode))
        .collect();
    reduce(rule, outcomes.iter())
}

fn reduce<'a>(
    rule: &CauseRule,
    outcomes: impl Iterator<Item = &'a ImageOutcome>,
) -> CauseEvaluation {
    let (mut n, mut m, mut degraded) = (0, 0, 0);
    let mut transcript = Vec::new();
    for o in outcomes {
        n += o.member_seen as usize;
        m += (o.member_seen && o.event_seen) as usize;
        degraded += o.degraded;
        transcript.extend(o.transcript.iter().cloned());
    }
    CauseEvaluation {
        evidence: CauseEvidence::from_counts(rule, n, m, degraded),
        transcript,
    }
}

/// Full pipeline: shooting points, neighborhood, identification, evidence.
pub fn diagnose(
    scene: &Scene,
    interest_id: &str,
    rules: &[CauseRule],
    oracle: &dyn AnswerOracle,
    vocab: &Vocabulary,
    options: &DiagnoseOptions,
) -> Result<DiagnosisReport, DiagnosisError> {
    if scene.camera(interest_id).is_none() {
        return Err(NeighborhoodError::UnknownImage(interest_id.to_string()).into());
    }
    let points = shooting_points_with_workers(scene, options.concurrency);
    let selection = select_surrounding(&points, interest_id, options.radius)?;
    diagnose_selection(&selection, rules, oracle, vocab, options)
}

/// Steps 1 and 2 over an existing neighborhood selection.
pub fn diagnose_selection(
    selection: &NeighborhoodSelection,
    rules: &[CauseRule],
    oracle: &dyn AnswerOracle,
    vocab: &Vocabulary,
    options: &DiagnoseOptions,
) -> Result<DiagnosisReport, DiagnosisError> {
    let rules = validate_rules(rules, vocab)?;
    let interest = selection.interest.image_id.clone();
    let identification = identify_damage_and_member(oracle, vocab, &interest)?;

    let applicable: Vec<&CauseRule> = rules
        .iter()
        .filter(|r| r.trigger_damage == identification.damage)
        .collect();
    let images = selection.analysed_images();

    // One work item per image, covering every applicable rule.
    let per_image: Vec<Vec<ImageOutcome>> = map_ordered(&images, options.concurrency, |id| {
        applicable
            .iter()
            .map(|rule| evaluate_image(oracle, id, rule, options.event_mode))
            .collect()
    });

    // Reduce over images in id order so transcript layout is independent of
    // scheduling and of the distance order.
    let mut by_id: Vec<usize> = (0..images.len()).collect();
    by_id.sort_by(|&a, &b| images[a].cmp(&images[b]));

    let mut evidence = Vec::with_capacity(applicable.len());
    let mut evidence_transcript: Vec<Vec<TranscriptEntry>> = vec![Vec::new(); images.len()];
    for (k, rule) in applicable.iter().enumerate() {
        let eval = reduce(rule, by_id.iter().map(|&i| &per_image[i][k]));
        evidence.push(eval.evidence);
    }
    for &i in &by_id {
        for outcome in &per_image[i] {
            evidence_transcript[i].extend(outcome.transcript.iter().cloned());
        }
    }
    rank_evidence(&mut evidence);

    let mut transcript = identification.transcript;
    for &i in &by_id {
        transcript.append(&mut evidence_transcript[i]);
    }
    let degraded_questions = evidence.iter().map(|e| e.degraded_questions).sum();

    Ok(DiagnosisReport {
        generated_at: None,
        interest_image: interest,
        identified_damage: identification.damage,
        identified_member: identification.member,
        analysed_images: images,
        surrounding_count: selection.surrounding.len(),
        excluded_count: selection.excluded.len(),
        missed_count: selection.missed.len(),
        no_applicable_rules: applicable.is_empty(),
        evidence,
        degraded_questions,
        transcript,
        config: ConfigEcho {
            radius: selection.radius,
            oracle: oracle.kind(),
            event_mode: options.event_mode,
            rules,
        },
    })
}

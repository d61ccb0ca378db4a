//! Adapter for agents that live outside the process (for example a hosted
//! language model behind a small wrapper). The request mirrors a five-part
//! role prompt: identity, case presentation, retrieved evidence, decision
//! framework and output schema. Responses are validated before acceptance.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::profile::{PreferenceTerm, RoleProfile};
use super::{AgentError, ClinicalAgent, Feedback, InteractionMode, OpinionContext};
use crate::domain::{argmax, cap_reasoning, FeatureBlocks, Opinion, Role, MAX_REASONING_TOKENS};
use crate::evidence::build_chain;

pub trait Transport: Send {
    /// Send one request body and wait at most `timeout` for the reply body.
    fn exchange(&mut self, request: &str, timeout: Duration) -> Result<String, AgentError>;
}

impl<F> Transport for F
where
    F: FnMut(&str, Duration) -> Result<String, AgentError> + Send,
{
    fn exchange(&mut self, request: &str, timeout: Duration) -> Result<String, AgentError> {
        self(request, timeout)
    }
}

/// Runs a command per request: request on stdin, response on stdout.
#[derive(Debug, Clone)]
pub struct ProcessTransport {
    pub program: String,
    pub args: Vec<String>,
}

impl Transport for ProcessTransport {
    fn exchange(&mut self, request: &str, timeout: Duration) -> Result<String, AgentError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| AgentError::Transport(format!("spawn `{}`: {e}", self.program)))?;
        let mut stdin = child.stdin.take().expect("stdin piped");
        let mut stdout = child.stdout.take().expect("stdout piped");
        let body = request.to_string();
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let _ = stdin.write_all(body.as_bytes());
            drop(stdin);
            let mut out = String::new();
            let res = stdout.read_to_string(&mut out).map(|_| out);
            let _ = tx.send(res);
        });
        match rx.recv_timeout(timeout) {
            Ok(Ok(out)) => {
                let _ = child.wait();
                Ok(out)
            }
            Ok(Err(e)) => {
                let _ = child.kill();
                Err(AgentError::Transport(e.to_string()))
            }
            Err(_) => {
                let _ = child.kill();
                let _ = child.wait();
                Err(AgentError::Timeout(timeout))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CasePresentation {
    pub id: String,
    pub features: Vec<f64>,
    pub blocks: FeatureBlocks,
    pub highlights: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreatmentEvidence {
    pub treatment: String,
    pub grade: String,
    pub citations: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputSchema {
    pub preferences: String,
    pub confidence: String,
    pub concerns: String,
    pub reasoning: String,
}

impl Default for OutputSchema {
    fn default() -> Self {
        Self {
            preferences: "array of K numbers in [-1,1], one per treatment in catalog order".into(),
            confidence: "number in [0,1]".into(),
            concerns: "array of distinct concern codes".into(),
            reasoning: format!("string of at most {MAX_REASONING_TOKENS} whitespace-separated tokens"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalRequest {
    pub kind: String,
    pub agent_id: String,
    pub role: Role,
    pub round: u32,
    pub case: CasePresentation,
    pub treatments: Vec<String>,
    pub evidence: Vec<TreatmentEvidence>,
    pub decision_framework: Vec<PreferenceTerm>,
    pub output_schema: OutputSchema,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub previous_matrix: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub previous_preferences: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feedback: Option<Feedback>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<InteractionMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalResponse {
    pub preferences: Vec<f64>,
    pub confidence: f64,
    pub concerns: Vec<String>,
    pub reasoning: String,
}

/// Parse and validate a response body against the opinion contract.
pub fn parse_response(body: &str, n_treatments: usize) -> Result<ExternalResponse, AgentError> {
    let resp: ExternalResponse =
        serde_json::from_str(body).map_err(|e| AgentError::SchemaViolation(e.to_string()))?;
    if resp.preferences.len() != n_treatments {
        return Err(AgentError::SchemaViolation(format!(
            "expected {n_treatments} preferences, got {}",
            resp.preferences.len()
        )));
    }
    let unique: BTreeSet<&String> = resp.concerns.iter().collect();
    if unique.len() != resp.concerns.len() {
        return Err(AgentError::SchemaViolation("duplicate concern codes".into()));
    }
    if let Some((i, v)) = resp
        .preferences
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && (-1.0..=1.0).contains(*v)))
    {
        return Err(AgentError::RangeViolation(format!("preference {i} = {v} not in [-1,1]")));
    }
    if !(resp.confidence.is_finite() && (0.0..=1.0).contains(&resp.confidence)) {
        return Err(AgentError::RangeViolation(format!("confidence {} not in [0,1]", resp.confidence)));
    }
    Ok(resp)
}

pub struct ExternalAgent<T: Transport> {
    id: String,
    profile: RoleProfile,
    transport: T,
    timeout: Duration,
    last_request: Option<ExternalRequest>,
}

impl<T: Transport> ExternalAgent<T> {
    pub fn new(id: &str, profile: RoleProfile, transport: T, timeout: Duration) -> Self {
        Self {
            id: id.to_string(),
            profile,
            transport,
            timeout,
            last_request: None,
        }
    }

    pub fn request(&self, ctx: &OpinionContext<'_>) -> ExternalRequest {
        let role = self.profile.role;
        let evidence = ctx
            .catalog
            .options
            .iter()
            .map(|t| {
                let chain = build_chain(ctx.case, role, t, ctx.store, ctx.evidence);
                TreatmentEvidence {
                    treatment: t.name.clone(),
                    grade: chain.grade.label().to_string(),
                    citations: chain.citations,
                }
            })
            .collect();
        ExternalRequest {
            kind: "opinion".into(),
            agent_id: self.id.clone(),
            role,
            round: ctx.round,
            case: CasePresentation {
                id: ctx.case.id.clone(),
                features: ctx.case.features.clone(),
                blocks: ctx.case.blocks.clone(),
                highlights: crate::evidence::extract_clinical_data(ctx.case, role),
            },
            treatments: ctx.catalog.options.iter().map(|t| t.name.clone()).collect(),
            evidence,
            decision_framework: self.profile.preference.clone(),
            output_schema: OutputSchema::default(),
            previous_matrix: ctx.previous_matrix.map(|m| m.entries.to_rows()),
            previous_preferences: ctx.previous.map(|o| o.raw_preferences.clone()),
            feedback: None,
            mode: None,
        }
    }

    fn call(&mut self, request: &ExternalRequest, k: usize) -> Result<ExternalResponse, AgentError> {
        let body = serde_json::to_string(request).map_err(|e| AgentError::Transport(e.to_string()))?;
        let reply = self.transport.exchange(&body, self.timeout)?;
        parse_response(&reply, k)
    }
}

impl<T: Transport> ClinicalAgent for ExternalAgent<T> {
    fn id(&self) -> &str {
        &self.id
    }

    fn role(&self) -> Role {
        self.profile.role
    }

    fn generate_opinion(&mut self, ctx: &OpinionContext<'_>) -> Result<Opinion, AgentError> {
        let k = ctx.catalog.len();
        let request = self.request(ctx);
        let resp = self.call(&request, k)?;
        self.last_request = Some(request);
        let top = argmax(&resp.preferences);
        let evidence = build_chain(ctx.case, self.profile.role, &ctx.catalog.options[top], ctx.store, ctx.evidence);
        let opinion = Opinion {
            agent_id: self.id.clone(),
            raw_preferences: resp.preferences,
            reasoning: cap_reasoning(&resp.reasoning),
            confidence: resp.confidence,
            concerns: resp.concerns.into_iter().collect(),
            evidence,
            round: ctx.round,
        };
        Ok(opinion)
    }

    fn revise_opinion(
        &mut self,
        previous: &Opinion,
        feedback: &Feedback,
        mode: InteractionMode,
    ) -> Result<Opinion, AgentError> {
        if mode == InteractionMode::MaintainPosition {
            return Ok(previous.clone());
        }
        let Some(base) = self.last_request.clone() else {
            return Err(AgentError::Transport("revision requested before any opinion".into()));
        };
        let request = ExternalRequest {
            kind: "revision".into(),
            previous_preferences: Some(previous.raw_preferences.clone()),
            feedback: Some(feedback.clone()),
            mode: Some(mode),
            ..base
        };
        let resp = self.call(&request, previous.raw_preferences.len())?;
        Ok(Opinion {
            raw_preferences: resp.preferences,
            reasoning: cap_reasoning(&resp.reasoning),
            concerns: resp.concerns.into_iter().collect(),
            ..previous.clone()
        })
    }
}

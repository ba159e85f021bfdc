//! Turning numeric content opinions into chat-completion prompts.

use std::io::Write;
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::campaign::OutputFormat;
use crate::error::{Error, Result};

const INSTRUCTION: &str = "You are going to help create content for a social media account. \
You will be asked to write persuasive content that has the given opinion on the given topic. \
Return only the text of the content.";

pub const DEFAULT_SCALE: (i64, i64) = (-100, 100);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub topic: String,
    /// For instance "tweet".
    pub content_type: String,
    pub scale: (i64, i64),
    pub opinion: i64,
}

impl PromptSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.scale;
        if lo >= hi {
            return Err(Error::InvalidParameter(format!("opinion scale ({lo}, {hi}) is empty")));
        }
        if self.opinion < lo || self.opinion > hi {
            return Err(Error::InvalidParameter(format!(
                "opinion {} is outside the scale ({lo}, {hi})",
                self.opinion
            )));
        }
        Ok(())
    }

    /// Spec for a model opinion `u ∈ [0, 1]` mapped onto `scale`.
    pub fn from_model_opinion(topic: &str, content_type: &str, u: f64, scale: (i64, i64)) -> Result<Self> {
        let spec = PromptSpec {
            topic: topic.to_string(),
            content_type: content_type.to_string(),
            scale,
            opinion: scale_opinion(u, scale)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn build_instruction() -> &'static str {
    INSTRUCTION
}

pub fn build_prompt(spec: &PromptSpec) -> Result<String> {
    spec.validate()?;
    Ok(format!(
        "Write a {} about \"{}\" that has an opinion of {}, where {} is total disagreement and {} is total agreement.",
        spec.content_type, spec.topic, spec.opinion, spec.scale.0, spec.scale.1
    ))
}

/// `round(lo + u·(hi − lo))`.
pub fn scale_opinion(u: f64, scale: (i64, i64)) -> Result<i64> {
    let (lo, hi) = scale;
    if lo >= hi {
        return Err(Error::InvalidParameter(format!("opinion scale ({lo}, {hi}) is empty")));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InvalidParameter(format!("opinion {u} is outside [0, 1]")));
    }
    Ok((lo as f64 + u * (hi - lo) as f64).round() as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout: Duration,
    pub dry_run: bool,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o-mini".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout: Duration::from_secs(60),
            dry_run: true,
        }
    }
}

impl EndpointConfig {
    pub fn url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// Sends one JSON POST. Swappable so tests never touch the network.
pub trait Transport: Sync {
    fn post_json(&self, url: &str, api_key: &str, body: &serde_json::Value, timeout: Duration) -> Result<HttpReply>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct UreqTransport;

impl Transport for UreqTransport {
    fn post_json(&self, url: &str, api_key: &str, body: &serde_json::Value, timeout: Duration) -> Result<HttpReply> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut resp = agent
            .post(url)
            .header("Authorization", format!("Bearer {api_key}"))
            .send_json(body)
            .map_err(|e| Error::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(HttpReply { status, body })
    }
}

/// Request body with the instruction as system message and the prompt as user message.
pub fn request_body(spec: &PromptSpec, endpoint: &EndpointConfig) -> Result<serde_json::Value> {
    Ok(json!({
        "model": endpoint.model,
        "messages": [
            {"role": "system", "content": build_instruction()},
            {"role": "user", "content": build_prompt(spec)?},
        ],
    }))
}

/// Instruction and prompt joined by a blank line, as returned by a dry run.
pub fn dry_run_text(spec: &PromptSpec) -> Result<String> {
    Ok(format!("{}\n\n{}", build_instruction(), build_prompt(spec)?))
}

pub fn generate_content(spec: &PromptSpec, endpoint: &EndpointConfig) -> Result<String> {
    generate_content_with(spec, endpoint, &UreqTransport)
}

pub fn generate_content_with(spec: &PromptSpec, endpoint: &EndpointConfig, transport: &dyn Transport) -> Result<String> {
    if endpoint.dry_run {
        return dry_run_text(spec);
    }
    let key = std::env::var(&endpoint.api_key_env)
        .ok()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| Error::MissingCredential(endpoint.api_key_env.clone()))?;
    let body = request_body(spec, endpoint)?;
    let reply = transport.post_json(&endpoint.url(), &key, &body, endpoint.timeout)?;
    if !(200..300).contains(&reply.status) {
        return Err(Error::Http {
            status: reply.status,
            body: reply.body,
        });
    }
    let v: serde_json::Value = serde_json::from_str(&reply.body)?;
    match v.pointer("/choices/0/message/content").and_then(|c| c.as_str()) {
        Some(text) if !text.is_empty() => Ok(text.to_string()),
        _ => Err(Error::EmptyCompletion),
    }
}

// ---------------------------------------------------------------------------
// rendering a whole policy path

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyPoint {
    pub t: usize,
    pub u: f64,
}

/// Reads `t,u` rows. Files with an `agent` column keep only `agent`'s rows.
pub fn read_policy_csv(path: &Path, agent: usize) -> Result<Vec<PolicyPoint>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ti), Some(ui)) = (col("t"), col("u")) else {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "expected columns t and u".into(),
        });
    };
    let ai = col("agent");
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: k + 2,
            message,
        };
        if let Some(ai) = ai {
            let a: usize = rec[ai].parse().map_err(|_| bad(format!("bad agent {:?}", &rec[ai])))?;
            if a != agent {
                continue;
            }
        }
        let t = rec[ti].parse().map_err(|_| bad(format!("bad time {:?}", &rec[ti])))?;
        let u = rec[ui].parse().map_err(|_| bad(format!("bad opinion {:?}", &rec[ui])))?;
        out.push(PolicyPoint { t, u });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderedRow {
    pub t: usize,
    pub opinion_scaled: i64,
    pub prompt: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completion: Option<String>,
    /// Model that produced the completion. No sampling parameters are sent,
    /// so the endpoint's defaults apply.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RenderOptions {
    pub topic: String,
    pub content_type: String,
    pub scale: (i64, i64),
    /// Keep every `stride`-th point.
    pub stride: usize,
    /// Upper bound on requests in flight.
    pub concurrency: usize,
}

/// One prompt per kept point; completions are requested unless the endpoint
/// is a dry run. Rows come back in input order.
pub fn render_content(
    points: &[PolicyPoint],
    opts: &RenderOptions,
    endpoint: &EndpointConfig,
    transport: &dyn Transport,
) -> Result<Vec<RenderedRow>> {
    if opts.stride == 0 || opts.concurrency == 0 {
        return Err(Error::InvalidParameter("stride and concurrency must be at least 1".into()));
    }
    let specs: Vec<(usize, PromptSpec)> = points
        .iter()
        .step_by(opts.stride)
        .map(|p| Ok((p.t, PromptSpec::from_model_opinion(&opts.topic, &opts.content_type, p.u, opts.scale)?)))
        .collect::<Result<_>>()?;

    let render = |(t, spec): &(usize, PromptSpec)| -> Result<RenderedRow> {
        let completion = if endpoint.dry_run {
            None
        } else {
            Some(generate_content_with(spec, endpoint, transport)?)
        };
        Ok(RenderedRow {
            t: *t,
            opinion_scaled: spec.opinion,
            prompt: build_prompt(spec)?,
            model: completion.as_ref().map(|_| endpoint.model.clone()),
            completion,
        })
    };
    if endpoint.dry_run {
        return specs.iter().map(render).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.concurrency)
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    pool.install(|| specs.par_iter().map(render).collect())
}

/// `t,opinion_scaled,prompt[,completion,model]`.
pub fn write_rendered<W: Write>(rows: &[RenderedRow], format: OutputFormat, out: W) -> Result<()> {
    let with_completion = rows.iter().any(|r| r.completion.is_some());
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let mut header = vec!["t", "opinion_scaled", "prompt"];
            if with_completion {
                header.extend(["completion", "model"]);
            }
            w.write_record(&header)?;
            for r in rows {
                let mut rec = vec![r.t.to_string(), r.opinion_scaled.to_string(), r.prompt.clone()];
                if with_completion {
                    rec.push(r.completion.clone().unwrap_or_default());
                    rec.push(r.model.clone().unwrap_or_default());
                }
                w.write_record(&rec)?;
            }
            w.flush().map_err(|e| Error::io("<output>", e))?;
        }
        OutputFormat::Ndjson => {
            let mut w = out;
            for r in rows {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
            }
            w.flush().map_err(|e| Error::io("<output>", e))?;
        }
    }
    Ok(())
}

//! C ABI for the nudgecast simulator.
//!
//! Every fallible function returns an [`NcStatus`]. On failure the message is
//! kept per thread and can be fetched with [`nc_last_error_message`].
//! Handles returned through out-pointers are owned by the caller and must be
//! released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use nudgecast::dynamics::{integrate, shift, ModelParams, Trajectory};
use nudgecast::network::{load_network, Edge, Network};
use nudgecast::objectives::ObjectiveKind;
use nudgecast::policy::{greedy_content_step, make_policy, PolicyFamily, PolicyParams};
use nudgecast::targeting::{greedy_targets, TargetMatrix, TargetingConfig};
use nudgecast::{llm, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Io = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcObjective {
    MaxMean = 0,
    MaxVar = 1,
    MinVar = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcFamily {
    Nudging = 0,
    Degroot = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NcModelParams {
    pub epsilon: f64,
    pub omega: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub lambda_max: f64,
}

impl From<NcModelParams> for ModelParams {
    fn from(p: NcModelParams) -> Self {
        ModelParams {
            epsilon: p.epsilon,
            omega: p.omega,
            u_min: p.u_min,
            u_max: p.u_max,
            lambda_max: p.lambda_max,
        }
    }
}

impl From<NcObjective> for ObjectiveKind {
    fn from(k: NcObjective) -> Self {
        match k {
            NcObjective::MaxMean => ObjectiveKind::MaximizeMean,
            NcObjective::MaxVar => ObjectiveKind::MaximizeVariance,
            NcObjective::MinVar => ObjectiveKind::MinimizeVariance,
        }
    }
}

impl From<NcFamily> for PolicyFamily {
    fn from(f: NcFamily) -> Self {
        match f {
            NcFamily::Nudging => PolicyFamily::Nudging,
            NcFamily::Degroot => PolicyFamily::Degroot,
        }
    }
}

/// Opaque network handle.
pub struct NcNetwork(Network);

/// Opaque trajectory handle.
pub struct NcTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(NcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_validation() { NcStatus::Validation } else { NcStatus::Io };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(NcStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NcStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside nudgecast".into());
            NcStatus::Panic
        }
    }
}

unsafe fn slice_or_empty<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(NcStatus::Validation, format!("{what} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

/// Copy of the last error on this thread, or NULL. Free with [`nc_string_free`].
#[no_mangle]
pub extern "C" fn nc_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(c) => c.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn nc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn nc_model_default() -> NcModelParams {
    let d = ModelParams::default();
    NcModelParams {
        epsilon: d.epsilon,
        omega: d.omega,
        u_min: d.u_min,
        u_max: d.u_max,
        lambda_max: d.lambda_max,
    }
}

/// Builds a network from parallel edge arrays; `sources[k]` is followed by `targets[k]`.
///
/// # Safety
/// Array pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn nc_network_new(
    n_nodes: usize,
    opinions: *const f64,
    n_edges: usize,
    sources: *const usize,
    targets: *const usize,
    rates: *const f64,
    out: *mut *mut NcNetwork,
) -> NcStatus {
    guard(|| {
        let opinions = slice_or_empty(opinions, n_nodes, "opinions")?;
        let sources = slice_or_empty(sources, n_edges, "sources")?;
        let targets = slice_or_empty(targets, n_edges, "targets")?;
        let rates = slice_or_empty(rates, n_edges, "rates")?;
        let edges = (0..n_edges)
            .map(|k| Edge {
                source: sources[k],
                target: targets[k],
                rate: rates[k],
            })
            .collect();
        let net = Network::new(opinions.to_vec(), edges)?;
        write_out(out, Box::into_raw(Box::new(NcNetwork(net))), "out")
    })
}

/// # Safety
/// Paths must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn nc_network_load(
    edge_path: *const c_char,
    opinion_path: *const c_char,
    out: *mut *mut NcNetwork,
) -> NcStatus {
    guard(|| {
        let e = str_arg(edge_path, "edge_path")?;
        let o = str_arg(opinion_path, "opinion_path")?;
        let net = load_network(Path::new(e), Path::new(o))?;
        write_out(out, Box::into_raw(Box::new(NcNetwork(net))), "out")
    })
}

/// # Safety
/// `net` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn nc_network_free(net: *mut NcNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_network_node_count(net: *const NcNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.node_count())
}

#[no_mangle]
pub extern "C" fn nc_shift(x: f64, model: NcModelParams) -> f64 {
    shift(x, &model.into())
}

/// One greedy content step. `has_prev = false` ignores `prev` and `gamma`.
///
/// # Safety
/// `weights` and `thetas` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn nc_greedy_step(
    weights: *const f64,
    thetas: *const f64,
    n: usize,
    has_prev: bool,
    prev: f64,
    gamma: f64,
    model: NcModelParams,
    out: *mut f64,
) -> NcStatus {
    guard(|| {
        let w = slice_or_empty(weights, n, "weights")?;
        let th = slice_or_empty(thetas, n, "thetas")?;
        let u = greedy_content_step(w, th, has_prev.then_some(prev), &PolicyParams { gamma }, &model.into())?;
        write_out(out, u, "out")
    })
}

/// # Safety
/// `theta` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn nc_objective(kind: NcObjective, theta: *const f64, n: usize, out: *mut f64) -> NcStatus {
    guard(|| {
        let th = slice_or_empty(theta, n, "theta")?;
        let r = ObjectiveKind::from(kind).evaluate(th)?;
        write_out(out, r, "out")
    })
}

unsafe fn target_matrix(n_agents: usize, n_assign: usize, agents: *const usize, nodes: *const usize) -> Result<TargetMatrix, Failure> {
    let agents = slice_or_empty(agents, n_assign, "agents")?;
    let nodes = slice_or_empty(nodes, n_assign, "nodes")?;
    let mut rows = vec![Vec::new(); n_agents];
    for (&a, &i) in agents.iter().zip(nodes) {
        rows.get_mut(a)
            .ok_or_else(|| Failure(NcStatus::Validation, format!("agent {a} out of range")))?
            .push(i);
    }
    Ok(TargetMatrix::new(rows)?)
}

/// Runs a policy family over `horizon` steps. Targets are `(agents[k], nodes[k])` pairs.
///
/// # Safety
/// `net` must be live; arrays must hold `n_assign` values.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn nc_simulate(
    net: *const NcNetwork,
    n_agents: usize,
    n_assign: usize,
    agents: *const usize,
    nodes: *const usize,
    family: NcFamily,
    objective: NcObjective,
    gamma: f64,
    model: NcModelParams,
    horizon: usize,
    substep: f64,
    out: *mut *mut NcTrajectory,
) -> NcStatus {
    guard(|| {
        let net = &net.as_ref().ok_or_else(|| null("net"))?.0;
        let x = target_matrix(n_agents, n_assign, agents, nodes)?;
        let m: ModelParams = model.into();
        let mut pol = make_policy(family.into(), objective.into(), PolicyParams { gamma }, &x, &m);
        let traj = integrate(net, &x, pol.as_mut(), horizon, substep, &m)?;
        write_out(out, Box::into_raw(Box::new(NcTrajectory(traj))), "out")
    })
}

/// # Safety
/// `traj` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn nc_trajectory_free(traj: *mut NcTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// # Safety
/// `traj` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_trajectory_horizon(traj: *const NcTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.horizon())
}

/// Copies θ(t) into `buf`, which must hold the network's node count.
///
/// # Safety
/// `traj` must be live; `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn nc_trajectory_opinions(traj: *const NcTrajectory, t: usize, buf: *mut f64, len: usize) -> NcStatus {
    guard(|| {
        let traj = &traj.as_ref().ok_or_else(|| null("traj"))?.0;
        let row = traj
            .node_opinions
            .get(t)
            .ok_or_else(|| Failure(NcStatus::Validation, format!("time {t} beyond horizon {}", traj.horizon())))?;
        if len < row.len() {
            return Err(Failure(NcStatus::BufferTooSmall, format!("need {} slots, got {len}", row.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(row.as_ptr(), buf, row.len());
        Ok(())
    })
}

/// Opinion of agent `a` on `[t, t+1)`; NaN for an agent without targets.
///
/// # Safety
/// `traj` must be live.
#[no_mangle]
pub unsafe extern "C" fn nc_trajectory_agent_opinion(traj: *const NcTrajectory, t: usize, agent: usize, out: *mut f64) -> NcStatus {
    guard(|| {
        let traj = &traj.as_ref().ok_or_else(|| null("traj"))?.0;
        let u = traj
            .agent_opinions
            .get(t)
            .and_then(|row| row.get(agent))
            .ok_or_else(|| Failure(NcStatus::Validation, format!("no agent {agent} at time {t}")))?;
        write_out(out, u.unwrap_or(f64::NAN), "out")
    })
}

/// Greedy targeting. Writes `(agent, node)` pairs; `capacity` must be at
/// least `n_agents * d_max`. `out_len` receives the pair count.
///
/// # Safety
/// `net` must be live; output arrays must hold `capacity` values.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn nc_greedy_targets(
    net: *const NcNetwork,
    objective: NcObjective,
    n_agents: usize,
    d_max: usize,
    consideration_size: usize,
    horizon: usize,
    family: NcFamily,
    gamma: f64,
    model: NcModelParams,
    substep: f64,
    out_agents: *mut usize,
    out_nodes: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> NcStatus {
    guard(|| {
        let net = &net.as_ref().ok_or_else(|| null("net"))?.0;
        let cfg = TargetingConfig {
            d_max,
            consideration_size,
            horizon,
            family: family.into(),
            substep,
        };
        let x = greedy_targets(net, objective.into(), n_agents, &cfg, &model.into(), &PolicyParams { gamma })?;
        let pairs: Vec<(usize, usize)> = x.assignments().collect();
        write_out(out_len, pairs.len(), "out_len")?;
        if pairs.len() > capacity {
            return Err(Failure(NcStatus::BufferTooSmall, format!("need {} slots, got {capacity}", pairs.len())));
        }
        if !pairs.is_empty() && (out_agents.is_null() || out_nodes.is_null()) {
            return Err(null("output arrays"));
        }
        for (k, (a, i)) in pairs.into_iter().enumerate() {
            *out_agents.add(k) = a;
            *out_nodes.add(k) = i;
        }
        Ok(())
    })
}

/// Static instruction string; do not free.
#[no_mangle]
pub extern "C" fn nc_build_instruction() -> *const c_char {
    static INSTRUCTION: std::sync::OnceLock<CString> = std::sync::OnceLock::new();
    INSTRUCTION
        .get_or_init(|| CString::new(llm::build_instruction()).expect("no nul"))
        .as_ptr()
}

/// Writes a newly allocated prompt to `out`; free with [`nc_string_free`].
///
/// # Safety
/// String arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn nc_build_prompt(
    topic: *const c_char,
    content_type: *const c_char,
    scale_min: i64,
    scale_max: i64,
    opinion: i64,
    out: *mut *mut c_char,
) -> NcStatus {
    guard(|| {
        let spec = llm::PromptSpec {
            topic: str_arg(topic, "topic")?.to_string(),
            content_type: str_arg(content_type, "content_type")?.to_string(),
            scale: (scale_min, scale_max),
            opinion,
        };
        let prompt = llm::build_prompt(&spec)?;
        let c = CString::new(prompt).map_err(|_| Failure(NcStatus::Validation, "prompt contains NUL".into()))?;
        write_out(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nc_scale_opinion(u: f64, scale_min: i64, scale_max: i64, out: *mut i64) -> NcStatus {
    guard(|| {
        let v = llm::scale_opinion(u, (scale_min, scale_max))?;
        write_out(out, v, "out")
    })
}

//! C ABI over the `relq` toolkit.
//!
//! Grids, Q-tables and trainers cross the boundary as opaque handles created
//! by a `relq_*_new`/`relq_*_from_*` call and released by the matching
//! `relq_*_free`. Every fallible call returns a [`RelqStatus`]; on failure the
//! message is available from [`relq_last_error_message`] on the same thread.
//! Strings returned by the library are owned by the caller and must be
//! released with [`relq_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use relq::harness::{self, detect_convergence};
use relq::{
    discounted_return, oracle, sup_norm_distance, Action, AgentParams, Algorithm, EpisodeRecord,
    Error, GridSpec, QTable, State, Trainer,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Parse = 4,
    Io = 5,
    OutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelqAction {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelqAlgorithm {
    Conventional = 0,
    Relative = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelqAgentParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// 0 selects the default cap of 4 * width * height.
    pub max_steps_per_episode: usize,
    pub algorithm: RelqAlgorithm,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelqTransition {
    pub row: usize,
    pub col: usize,
    pub action: RelqAction,
    pub reward: f64,
    pub next_row: usize,
    pub next_col: usize,
    pub terminal: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelqEpisodeRecord {
    pub episode: usize,
    pub steps: usize,
    pub discounted_return: f64,
    pub max_q_delta: f64,
    pub sum_q: f64,
    pub reached_goal: bool,
}

/// Opaque grid handle.
pub struct RelqGrid(GridSpec);

/// Opaque Q-table handle.
pub struct RelqQTable(QTable);

/// Opaque training run: one table, one random stream, and the per-episode
/// records produced so far.
pub struct RelqTrainer {
    trainer: Trainer,
    records: Vec<EpisodeRecord>,
}

impl From<RelqAction> for Action {
    fn from(a: RelqAction) -> Self {
        match a {
            RelqAction::Up => Action::Up,
            RelqAction::Down => Action::Down,
            RelqAction::Left => Action::Left,
            RelqAction::Right => Action::Right,
        }
    }
}

impl From<Action> for RelqAction {
    fn from(a: Action) -> Self {
        match a {
            Action::Up => RelqAction::Up,
            Action::Down => RelqAction::Down,
            Action::Left => RelqAction::Left,
            Action::Right => RelqAction::Right,
        }
    }
}

impl From<RelqAlgorithm> for Algorithm {
    fn from(a: RelqAlgorithm) -> Self {
        match a {
            RelqAlgorithm::Conventional => Algorithm::Conventional,
            RelqAlgorithm::Relative => Algorithm::Relative,
        }
    }
}

impl From<&EpisodeRecord> for RelqEpisodeRecord {
    fn from(r: &EpisodeRecord) -> Self {
        RelqEpisodeRecord {
            episode: r.episode,
            steps: r.steps,
            discounted_return: r.discounted_return,
            max_q_delta: r.max_q_delta,
            sum_q: r.sum_q,
            reached_goal: r.reached_goal,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(RelqStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::ConfigParse(_) => RelqStatus::Parse,
            Error::ConfigRead { .. } | Error::Output { .. } => RelqStatus::Io,
            Error::UnindexedState(_) => RelqStatus::OutOfRange,
            _ => RelqStatus::InvalidArgument,
        };
        let mut msg = e.to_string();
        let mut source = std::error::Error::source(&e);
        while let Some(s) = source {
            msg.push_str(": ");
            msg.push_str(&s.to_string());
            source = s.source();
        }
        Failure(status, msg)
    }
}

fn null(what: &str) -> Failure {
    Failure(RelqStatus::NullPointer, format!("`{what}` is null"))
}

/// Run `body`, translating errors and panics into a status code.
fn guard<F>(body: F) -> RelqStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            RelqStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside relq");
            RelqStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller passes either null or a live handle of type T.
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: as for `borrow`, plus no other reference to `*p` is live.
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null and NUL-terminated per the caller's contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|e| Failure(RelqStatus::InvalidUtf8, format!("`{what}`: {e}")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null and writable per the caller's contract.
    unsafe { out.write(value) };
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message describing the last failed call on this thread, or an empty
/// string. The pointer stays valid until the next `relq_*` call on this
/// thread.
#[no_mangle]
pub extern "C" fn relq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer returned by a `relq_*` function that is
/// documented to return an owned string, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn relq_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by CString::into_raw in this crate.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Parse and validate a grid from its JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn relq_grid_from_json(
    json: *const c_char,
    out: *mut *mut RelqGrid,
) -> RelqStatus {
    guard(|| {
        let json = unsafe { read_str(json, "json")? };
        let grid = GridSpec::from_json(json)?;
        unsafe { write_out(out, Box::into_raw(Box::new(RelqGrid(grid))), "out") }
    })
}

/// # Safety
/// `grid` must be null or a handle from `relq_grid_from_json`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn relq_grid_free(grid: *mut RelqGrid) {
    if !grid.is_null() {
        drop(unsafe { Box::from_raw(grid) });
    }
}

/// Owned JSON string (release with `relq_string_free`), or null if `grid`
/// is null.
///
/// # Safety
/// `grid` must be null or a live grid handle.
#[no_mangle]
pub unsafe extern "C" fn relq_grid_to_json(grid: *const RelqGrid) -> *mut c_char {
    match unsafe { grid.as_ref() } {
        Some(g) => into_c_string(g.0.to_json()),
        None => ptr::null_mut(),
    }
}

/// Number of free cells, or 0 if `grid` is null.
///
/// # Safety
/// `grid` must be null or a live grid handle.
#[no_mangle]
pub unsafe extern "C" fn relq_grid_num_states(grid: *const RelqGrid) -> usize {
    unsafe { grid.as_ref() }.map_or(0, |g| g.0.states().len())
}

/// Apply one move.
///
/// # Safety
/// `grid` must be a live grid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn relq_grid_step(
    grid: *const RelqGrid,
    row: usize,
    col: usize,
    action: RelqAction,
    out: *mut RelqTransition,
) -> RelqStatus {
    guard(|| {
        let grid = unsafe { borrow(grid, "grid")? };
        let t = grid.0.step(State::new(row, col), action.into())?;
        let t = RelqTransition {
            row: t.state.row,
            col: t.state.col,
            action: t.action.into(),
            reward: t.reward,
            next_row: t.next.row,
            next_col: t.next.col,
            terminal: t.terminal,
        };
        unsafe { write_out(out, t, "out") }
    })
}

/// Fill `out` with the default parameters for `grid`: alpha = gamma = 0.8,
/// epsilon = 0.2, seed 0, step cap 4 * width * height.
///
/// # Safety
/// `grid` must be a live grid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn relq_agent_params_default(
    grid: *const RelqGrid,
    algorithm: RelqAlgorithm,
    out: *mut RelqAgentParams,
) -> RelqStatus {
    guard(|| {
        let grid = unsafe { borrow(grid, "grid")? };
        let p = AgentParams::for_grid(&grid.0, algorithm.into());
        let p = RelqAgentParams {
            alpha: p.alpha,
            gamma: p.gamma,
            epsilon: p.epsilon,
            seed: p.seed,
            max_steps_per_episode: p.max_steps_per_episode,
            algorithm,
        };
        unsafe { write_out(out, p, "out") }
    })
}

/// Start a training run with a zero table.
///
/// # Safety
/// `grid` must be a live grid handle, `params` readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn relq_trainer_new(
    grid: *const RelqGrid,
    params: *const RelqAgentParams,
    out: *mut *mut RelqTrainer,
) -> RelqStatus {
    guard(|| {
        let grid = unsafe { borrow(grid, "grid")? };
        let p = unsafe { borrow(params, "params")? };
        let mut params = AgentParams::for_grid(&grid.0, p.algorithm.into());
        params.alpha = p.alpha;
        params.gamma = p.gamma;
        params.epsilon = p.epsilon;
        params.seed = p.seed;
        if p.max_steps_per_episode != 0 {
            params.max_steps_per_episode = p.max_steps_per_episode;
        }
        let trainer = Trainer::new(&grid.0, params)?;
        let handle = RelqTrainer {
            trainer,
            records: Vec::new(),
        };
        unsafe { write_out(out, Box::into_raw(Box::new(handle)), "out") }
    })
}

/// # Safety
/// `trainer` must be null or a live trainer handle.
#[no_mangle]
pub unsafe extern "C" fn relq_trainer_free(trainer: *mut RelqTrainer) {
    if !trainer.is_null() {
        drop(unsafe { Box::from_raw(trainer) });
    }
}

/// Run `episodes` more episodes.
///
/// # Safety
/// `trainer` must be a live trainer handle not used concurrently.
#[no_mangle]
pub unsafe extern "C" fn relq_trainer_run(
    trainer: *mut RelqTrainer,
    episodes: usize,
) -> RelqStatus {
    guard(|| {
        let t = unsafe { borrow_mut(trainer, "trainer")? };
        for _ in 0..episodes {
            let record = t.trainer.run_episode()?;
            t.records.push(record);
        }
        Ok(())
    })
}

/// Episodes completed so far, or 0 if `trainer` is null.
///
/// # Safety
/// `trainer` must be null or a live trainer handle.
#[no_mangle]
pub unsafe extern "C" fn relq_trainer_episode_count(trainer: *const RelqTrainer) -> usize {
    unsafe { trainer.as_ref() }.map_or(0, |t| t.records.len())
}

/// Metrics of episode `index` (0-based position, 1-based `episode` field).
///
/// # Safety
/// `trainer` must be a live trainer handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn relq_trainer_record(
    trainer: *const RelqTrainer,
    index: usize,
    out: *mut RelqEpisodeRecord,
) -> RelqStatus {
    guard(|| {
        let t = unsafe { borrow(trainer, "trainer")? };
        let r = t.records.get(index).ok_or_else(|| {
            Failure(
                RelqStatus::OutOfRange,
                format!(
                    "episode index {index} out of range ({} recorded)",
                    t.records.len()
                ),
            )
        })?;
        unsafe { write_out(out, r.into(), "out") }
    })
}

/// Copy of the trainer's current table as a new handle.
///
/// # Safety
/// `trainer` must be a live trainer handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn relq_trainer_qtable(
    trainer: *const RelqTrainer,
    out: *mut *mut RelqQTable,
) -> RelqStatus {
    guard(|| {
        let t = unsafe { borrow(trainer, "trainer")? };
        let table = Box::new(RelqQTable(t.trainer.table().clone()));
        unsafe { write_out(out, Box::into_raw(table), "out") }
    })
}

/// Exact Q* by value iteration.
///
/// # Safety
/// `grid` must be a live grid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn relq_value_iteration(
    grid: *const RelqGrid,
    gamma: f64,
    tol: f64,
    out: *mut *mut RelqQTable,
) -> RelqStatus {
    guard(|| {
        let grid = unsafe { borrow(grid, "grid")? };
        let table = oracle::value_iteration(&grid.0, gamma, tol)?;
        unsafe { write_out(out, Box::into_raw(Box::new(RelqQTable(table))), "out") }
    })
}

/// # Safety
/// `table` must be null or a live table handle.
#[no_mangle]
pub unsafe extern "C" fn relq_qtable_free(table: *mut RelqQTable) {
    if !table.is_null() {
        drop(unsafe { Box::from_raw(table) });
    }
}

/// # Safety
/// `table` must be a live table handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn relq_qtable_get(
    table: *const RelqQTable,
    row: usize,
    col: usize,
    action: RelqAction,
    out: *mut f64,
) -> RelqStatus {
    guard(|| {
        let table = unsafe { borrow(table, "table")? };
        let v = table.0.get(State::new(row, col), action.into())?;
        unsafe { write_out(out, v, "out") }
    })
}

/// # Safety
/// `table` must be a live table handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn relq_qtable_max_q(
    table: *const RelqQTable,
    row: usize,
    col: usize,
    out: *mut f64,
) -> RelqStatus {
    guard(|| {
        let table = unsafe { borrow(table, "table")? };
        let v = table.0.max_q(State::new(row, col))?;
        unsafe { write_out(out, v, "out") }
    })
}

/// # Safety
/// `table` must be a live table handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn relq_qtable_argmax(
    table: *const RelqQTable,
    row: usize,
    col: usize,
    out: *mut RelqAction,
) -> RelqStatus {
    guard(|| {
        let table = unsafe { borrow(table, "table")? };
        let a = table.0.argmax_action(State::new(row, col))?;
        unsafe { write_out(out, a.into(), "out") }
    })
}

/// Largest absolute entrywise difference between two tables over the same
/// grid.
///
/// # Safety
/// `a` and `b` must be live table handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn relq_qtable_sup_norm(
    a: *const RelqQTable,
    b: *const RelqQTable,
    out: *mut f64,
) -> RelqStatus {
    guard(|| {
        let a = unsafe { borrow(a, "a")? };
        let b = unsafe { borrow(b, "b")? };
        let d = sup_norm_distance(&a.0, &b.0)?;
        unsafe { write_out(out, d, "out") }
    })
}

/// The table as CSV (`row,col,up,down,left,right`). Owned string, or null if
/// `table` is null.
///
/// # Safety
/// `table` must be null or a live table handle.
#[no_mangle]
pub unsafe extern "C" fn relq_qtable_to_csv(table: *const RelqQTable) -> *mut c_char {
    match unsafe { table.as_ref() } {
        Some(t) => into_c_string(t.0.to_csv()),
        None => ptr::null_mut(),
    }
}

/// Σ gamma^k · rewards[k].
///
/// # Safety
/// `rewards` must point to `len` readable doubles (or be null with `len` 0);
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn relq_discounted_return(
    rewards: *const f64,
    len: usize,
    gamma: f64,
    out: *mut f64,
) -> RelqStatus {
    guard(|| {
        let rewards = unsafe { slice(rewards, len, "rewards")? };
        if !(0.0..1.0).contains(&gamma) {
            return Err(Failure(
                RelqStatus::InvalidArgument,
                format!("gamma must lie in [0, 1), got {gamma}"),
            ));
        }
        unsafe { write_out(out, discounted_return(rewards, gamma), "out") }
    })
}

/// First 1-based episode after which `window` consecutive deltas stay below
/// `tol`. `*found` is false when there is none, and `*episode` is then 0.
///
/// # Safety
/// `deltas` must point to `len` readable doubles (or be null with `len` 0);
/// `episode` and `found` must be writable.
#[no_mangle]
pub unsafe extern "C" fn relq_detect_convergence(
    deltas: *const f64,
    len: usize,
    tol: f64,
    window: usize,
    episode: *mut usize,
    found: *mut bool,
) -> RelqStatus {
    guard(|| {
        let deltas = unsafe { slice(deltas, len, "deltas")? };
        if window == 0 {
            return Err(Failure(
                RelqStatus::InvalidArgument,
                "window must be at least 1".into(),
            ));
        }
        let result = detect_convergence(deltas, tol, window);
        unsafe {
            write_out(episode, result.unwrap_or(0), "episode")?;
            write_out(found, result.is_some(), "found")
        }
    })
}

/// Run both algorithms over every seed of the config file and write curves,
/// tables, Q* and `summary.csv` under `out_dir`.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn relq_compare(
    config_path: *const c_char,
    out_dir: *const c_char,
) -> RelqStatus {
    guard(|| {
        let config_path = unsafe { read_str(config_path, "config_path")? };
        let out_dir = unsafe { read_str(out_dir, "out_dir")? };
        let config = harness::load_config(config_path)?;
        let comparison = harness::run_comparison(&config)?;
        harness::write_comparison(&comparison, Path::new(out_dir))?;
        Ok(())
    })
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees `len` readable elements.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

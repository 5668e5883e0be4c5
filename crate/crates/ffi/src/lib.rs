//! C ABI over the `psro` crate.
//!
//! Every function returns a [`PsroStatus`]. On failure, the thread-local message
//! from [`psro_last_error_message`] describes the cause. Runs are opaque
//! [`PsroRun`] handles created by `psro_run_new*` and released with
//! [`psro_run_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use psro::config::ExperimentConfig;
use psro::engine::Run;
use psro::error::Error;
use psro::eval::sum_regret;
use psro::game::{EmpiricalGame, PureProfile};
use psro::solvers::{solve_nash, DEFAULT_TOLERANCE};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsroStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    NoEquilibrium = 4,
    IoError = 5,
    CorruptCheckpoint = 6,
    BufferTooSmall = 7,
    RuntimeError = 8,
    Panic = 9,
}

/// Opaque run handle.
pub struct PsroRun {
    run: Run,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> PsroStatus {
    match err {
        Error::Config { .. } => PsroStatus::ConfigError,
        Error::InvalidArgument(_) | Error::WrongEnvironment(_) | Error::PlayerCountUnsupported { .. } => {
            PsroStatus::InvalidArgument
        }
        Error::NoEquilibriumFound { .. } => PsroStatus::NoEquilibrium,
        Error::Io(_) => PsroStatus::IoError,
        Error::CorruptCheckpoint { .. } => PsroStatus::CorruptCheckpoint,
        _ => PsroStatus::RuntimeError,
    }
}

fn fail(status: PsroStatus, msg: impl Into<String>) -> PsroStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> Result<(), PsroStatus>) -> PsroStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PsroStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(PsroStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, PsroStatus>;
}

impl<T> OrStatus<T> for psro::error::Result<T> {
    fn or_status(self) -> Result<T, PsroStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, PsroStatus> {
    if p.is_null() {
        return Err(fail(PsroStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(PsroStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn run_ref<'a>(run: *const PsroRun) -> Result<&'a PsroRun, PsroStatus> {
    run.as_ref().ok_or_else(|| fail(PsroStatus::NullPointer, "run handle is null"))
}

unsafe fn out_ref<'a, T>(p: *mut T) -> Result<&'a mut T, PsroStatus> {
    p.as_mut().ok_or_else(|| fail(PsroStatus::NullPointer, "output pointer is null"))
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn psro_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a run from TOML config text. Relative paths resolve against the
/// current directory.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psro_run_new(config_toml: *const c_char, out: *mut *mut PsroRun) -> PsroStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let text = str_arg(config_toml, "config_toml")?;
        let cfg = ExperimentConfig::parse(text).or_status()?;
        let run = Run::new(cfg.run).or_status()?;
        *out = Box::into_raw(Box::new(PsroRun { run }));
        Ok(())
    })
}

/// Restores a run from a checkpoint directory.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psro_run_resume(dir: *const c_char, out: *mut *mut PsroRun) -> PsroStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let dir = str_arg(dir, "dir")?;
        let run = Run::resume(Path::new(dir)).or_status()?;
        *out = Box::into_raw(Box::new(PsroRun { run }));
        Ok(())
    })
}

/// Releases a run. Null is ignored.
///
/// # Safety
/// `run` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn psro_run_free(run: *mut PsroRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Runs one epoch. `advanced` is set to false once the run has finished.
///
/// # Safety
/// `run` must be a live handle; `advanced` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psro_run_step(run: *mut PsroRun, advanced: *mut bool) -> PsroStatus {
    guard(|| {
        let r = run.as_mut().ok_or_else(|| fail(PsroStatus::NullPointer, "run handle is null"))?;
        let advanced = out_ref(advanced)?;
        *advanced = r.run.step().or_status()?.is_some();
        Ok(())
    })
}

/// Runs all remaining epochs.
///
/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn psro_run_run(run: *mut PsroRun) -> PsroStatus {
    guard(|| {
        let r = run.as_mut().ok_or_else(|| fail(PsroStatus::NullPointer, "run handle is null"))?;
        r.run.run().or_status()?;
        Ok(())
    })
}

/// Completed epochs (0 right after creation).
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psro_run_epoch(run: *const PsroRun, out: *mut usize) -> PsroStatus {
    guard(|| {
        *out_ref(out)? = run_ref(run)?.run.epoch();
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psro_run_n_players(run: *const PsroRun, out: *mut usize) -> PsroStatus {
    guard(|| {
        *out_ref(out)? = run_ref(run)?.run.game().n_players();
        Ok(())
    })
}

/// Cumulative learner timesteps.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psro_run_training_steps(run: *const PsroRun, out: *mut u64) -> PsroStatus {
    guard(|| {
        *out_ref(out)? = run_ref(run)?.run.record().last().training_steps;
        Ok(())
    })
}

/// Writes the current solution mixture of `player` into `weights`. `written`
/// receives the mixture length, also when the buffer is too small.
///
/// # Safety
/// `run` must be a live handle; `weights` must be valid for `len` doubles;
/// `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psro_run_solution(
    run: *const PsroRun,
    player: usize,
    weights: *mut f64,
    len: usize,
    written: *mut usize,
) -> PsroStatus {
    guard(|| {
        let r = run_ref(run)?;
        let written = out_ref(written)?;
        let mixtures = &r.run.solution().mixtures;
        let m = mixtures
            .get(player)
            .ok_or_else(|| fail(PsroStatus::InvalidArgument, format!("no player {player}")))?;
        *written = m.len();
        if len < m.len() {
            return Err(fail(PsroStatus::BufferTooSmall, format!("need {} weights", m.len())));
        }
        if weights.is_null() {
            return Err(fail(PsroStatus::NullPointer, "weights is null"));
        }
        ptr::copy_nonoverlapping(m.weights().as_ptr(), weights, m.len());
        Ok(())
    })
}

/// SumRegret of the current solution within the empirical game.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psro_run_enfg_sum_regret(run: *const PsroRun, out: *mut f64) -> PsroStatus {
    guard(|| {
        *out_ref(out)? = sum_regret(&run_ref(run)?.run.record().last().enfg_regret);
        Ok(())
    })
}

/// Exact SumRegret in the underlying game; matrix games only.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psro_run_game_sum_regret(run: *const PsroRun, out: *mut f64) -> PsroStatus {
    guard(|| {
        let out = out_ref(out)?;
        let rec = run_ref(run)?.run.record().last();
        match &rec.game_regret {
            Some(g) => {
                *out = sum_regret(g);
                Ok(())
            }
            None => Err(fail(PsroStatus::InvalidArgument, "exact regret needs a matrix game")),
        }
    })
}

/// Writes a resumable checkpoint to `dir`.
///
/// # Safety
/// `run` must be a live handle; `dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn psro_run_checkpoint(run: *const PsroRun, dir: *const c_char) -> PsroStatus {
    guard(|| {
        let r = run_ref(run)?;
        let dir = str_arg(dir, "dir")?;
        r.run.checkpoint(Path::new(dir)).or_status()
    })
}

/// Nash equilibrium of a bimatrix game by support enumeration.
///
/// `a` and `b` hold row-major `rows x cols` payoffs for the row and column player.
/// `x` receives `rows` weights and `y` receives `cols` weights.
///
/// # Safety
/// `a` and `b` must be valid for `rows * cols` doubles, `x` for `rows`, `y` for `cols`.
#[no_mangle]
pub unsafe extern "C" fn psro_solve_nash_bimatrix(
    rows: usize,
    cols: usize,
    a: *const f64,
    b: *const f64,
    x: *mut f64,
    y: *mut f64,
) -> PsroStatus {
    guard(|| {
        if a.is_null() || b.is_null() || x.is_null() || y.is_null() {
            return Err(fail(PsroStatus::NullPointer, "payoff or output pointer is null"));
        }
        if rows == 0 || cols == 0 {
            return Err(fail(PsroStatus::InvalidArgument, "empty game"));
        }
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| fail(PsroStatus::InvalidArgument, "game too large"))?;
        let a = std::slice::from_raw_parts(a, n);
        let b = std::slice::from_raw_parts(b, n);
        if a.iter().chain(b).any(|v| !v.is_finite()) {
            return Err(fail(PsroStatus::InvalidArgument, "payoffs must be finite"));
        }
        let mut game: EmpiricalGame<()> = EmpiricalGame::new(2);
        (0..rows).for_each(|_| {
            game.add_policy(0, ());
        });
        (0..cols).for_each(|_| {
            game.add_policy(1, ());
        });
        for r in 0..rows {
            for c in 0..cols {
                let k = r * cols + c;
                game.record(PureProfile::new(vec![r, c]), vec![a[k], b[k]], 1).or_status()?;
            }
        }
        let sol = solve_nash(&game, DEFAULT_TOLERANCE).or_status()?;
        ptr::copy_nonoverlapping(sol.mixtures[0].weights().as_ptr(), x, rows);
        ptr::copy_nonoverlapping(sol.mixtures[1].weights().as_ptr(), y, cols);
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn psro_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

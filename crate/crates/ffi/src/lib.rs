//! C ABI over the polycdg solver.
//!
//! Meshes and solutions are opaque heap handles created by `pcdg_*`
//! constructors and released with the matching `*_free` function. Every
//! fallible call returns a [`PcdgStatus`]; on failure a message is kept per
//! thread and can be copied out with [`pcdg_last_error_message`]. Panics are
//! caught at the boundary and reported as [`PcdgStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use polycdg::analysis::{energy_error, h1h_error, l2_error};
use polycdg::mesh::{self, Mesh, MeshFamily};
use polycdg::problem::{Problem, SineProblem};
use polycdg::system::{assemble_with, solve, Discretization};
use polycdg::{BcMode, BrokenPolynomial, Error};

pub const PCDG_FAMILY_TRIANGLES: i32 = 0;
pub const PCDG_FAMILY_POLYGONS: i32 = 1;
pub const PCDG_BC_STRONG: i32 = 0;
pub const PCDG_BC_WEAK: i32 = 1;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PcdgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Numerical = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Opaque mesh handle.
pub struct PcdgMesh {
    mesh: Mesh,
}

/// Opaque handle to a solved test problem.
pub struct PcdgSolution {
    mesh: Mesh,
    u_h: BrokenPolynomial,
    errors: PcdgErrors,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PcdgMeshCounts {
    pub vertices: usize,
    pub edges: usize,
    pub boundary_edges: usize,
    pub cells: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PcdgErrors {
    /// `‖u_h − Q_0 u‖`
    pub l2_error: f64,
    /// `|||u − u_h|||`
    pub energy_error: f64,
    /// `‖u_h − Q_0 u‖_{1,h}`
    pub h1h_error: f64,
    pub dim: usize,
    pub cg_iterations: usize,
    pub cg_residual: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> PcdgStatus {
    match e {
        Error::InvalidArgument(_) => PcdgStatus::InvalidArgument,
        Error::Parse { .. } => PcdgStatus::Parse,
        Error::Io { .. } => PcdgStatus::Io,
        _ => PcdgStatus::Numerical,
    }
}

/// Runs `f`, recording errors and panics in the thread-local message.
fn guard(f: impl FnOnce() -> Result<(), (PcdgStatus, String)>) -> PcdgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PcdgStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal panic: {msg}"));
            PcdgStatus::Panic
        }
    }
}

fn lift(e: Error) -> (PcdgStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PcdgStatus, String) {
    (PcdgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(path: *const c_char) -> Result<String, (PcdgStatus, String)> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| (PcdgStatus::InvalidArgument, "path is not valid UTF-8".to_string()))
}

fn family_arg(family: i32) -> Result<MeshFamily, (PcdgStatus, String)> {
    match family {
        PCDG_FAMILY_TRIANGLES => Ok(MeshFamily::ForwardSlashTriangles),
        PCDG_FAMILY_POLYGONS => Ok(MeshFamily::CutCornerPolygons),
        other => Err((PcdgStatus::InvalidArgument, format!("unknown mesh family {other}"))),
    }
}

fn bc_arg(bc: i32) -> Result<BcMode, (PcdgStatus, String)> {
    match bc {
        PCDG_BC_STRONG => Ok(BcMode::Strong),
        PCDG_BC_WEAK => Ok(BcMode::Weak),
        other => Err((PcdgStatus::InvalidArgument, format!("unknown boundary mode {other}"))),
    }
}

/// Generates a mesh of the given family (`PCDG_FAMILY_*`) and level.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn pcdg_mesh_generate(family: i32, level: u32, out: *mut *mut PcdgMesh) -> PcdgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let mesh = mesh::generate(family_arg(family)?, level).map_err(lift)?;
        *out = Box::into_raw(Box::new(PcdgMesh { mesh }));
        Ok(())
    })
}

/// Reads a mesh in the text format written by [`pcdg_mesh_write`].
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` as in [`pcdg_mesh_generate`].
#[no_mangle]
pub unsafe extern "C" fn pcdg_mesh_read(path: *const c_char, out: *mut *mut PcdgMesh) -> PcdgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = path_arg(path)?;
        let mesh = mesh::read_mesh(path).map_err(lift)?;
        *out = Box::into_raw(Box::new(PcdgMesh { mesh }));
        Ok(())
    })
}

/// # Safety
/// `mesh` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pcdg_mesh_write(mesh: *const PcdgMesh, path: *const c_char) -> PcdgStatus {
    guard(|| {
        let mesh = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        let path = path_arg(path)?;
        mesh::write_mesh(&mesh.mesh, path).map_err(lift)
    })
}

/// Releases a mesh handle. Null is ignored.
///
/// # Safety
/// `mesh` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pcdg_mesh_free(mesh: *mut PcdgMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// # Safety
/// `mesh` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn pcdg_mesh_counts(mesh: *const PcdgMesh, out: *mut PcdgMeshCounts) -> PcdgStatus {
    guard(|| {
        let mesh = &mesh.as_ref().ok_or_else(|| null("mesh"))?.mesh;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = PcdgMeshCounts {
            vertices: mesh.n_vertices(),
            edges: mesh.n_edges(),
            boundary_edges: mesh.n_boundary_edges(),
            cells: mesh.n_cells(),
        };
        Ok(())
    })
}

/// Stores the number of validation violations in `n_violations`; the first
/// one, if any, becomes the last-error message.
///
/// # Safety
/// `mesh` must be a live handle and `n_violations` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn pcdg_mesh_validate(mesh: *const PcdgMesh, n_violations: *mut usize) -> PcdgStatus {
    let mut first = None;
    let status = guard(|| {
        let mesh = &mesh.as_ref().ok_or_else(|| null("mesh"))?.mesh;
        let n = n_violations.as_mut().ok_or_else(|| null("n_violations"))?;
        let v = mesh::validate(mesh);
        *n = v.len();
        first = v.first().map(|v| v.to_string());
        Ok(())
    });
    if let Some(msg) = first {
        set_error(msg);
    }
    status
}

/// Solves the sine test problem on `mesh` with degree `k`, boundary mode
/// `bc` (`PCDG_BC_*`) and weak-gradient degree `j` (negative for the
/// default rule), to relative residual `tol`.
///
/// # Safety
/// `mesh` must be a live handle; `out` as in [`pcdg_mesh_generate`].
#[no_mangle]
pub unsafe extern "C" fn pcdg_solve(
    mesh: *const PcdgMesh,
    k: u32,
    bc: i32,
    j: i32,
    tol: f64,
    out: *mut *mut PcdgSolution,
) -> PcdgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let mesh = &mesh.as_ref().ok_or_else(|| null("mesh"))?.mesh;
        let bc = bc_arg(bc)?;
        let k = k as usize;
        if !(1..=polycdg::study::MAX_DEGREE).contains(&k) {
            return Err((PcdgStatus::InvalidArgument, format!("k must be in 1..=5, got {k}")));
        }
        if !(tol > 0.0 && tol < 1.0) {
            return Err((PcdgStatus::InvalidArgument, format!("tol must be in (0, 1), got {tol}")));
        }
        let j = if j < 0 { None } else { Some(j as usize) };
        let problem = SineProblem;
        let disc = Discretization::new(mesh, k, bc, j).map_err(lift)?;
        let system = assemble_with(mesh, &disc, &|p| problem.source(p)).map_err(lift)?;
        let sol = solve(&system, tol, None).map_err(lift)?;
        let u_h = disc.to_broken(&sol.coeffs);
        let errors = PcdgErrors {
            l2_error: l2_error(mesh, &u_h, &|p| problem.solution(p)).map_err(lift)?,
            energy_error: energy_error(mesh, &disc.ops, &u_h, &|p| problem.gradient(p)).map_err(lift)?,
            h1h_error: h1h_error(mesh, &u_h, |p| problem.solution(p)).map_err(lift)?,
            dim: disc.n_dofs(),
            cg_iterations: sol.iterations,
            cg_residual: sol.residual,
        };
        *out = Box::into_raw(Box::new(PcdgSolution {
            mesh: mesh.clone(),
            u_h,
            errors,
        }));
        Ok(())
    })
}

/// Releases a solution handle. Null is ignored.
///
/// # Safety
/// `solution` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pcdg_solution_free(solution: *mut PcdgSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// `solution` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn pcdg_solution_errors(solution: *const PcdgSolution, out: *mut PcdgErrors) -> PcdgStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = s.errors;
        Ok(())
    })
}

/// Copies the per-cell scaled-monomial coefficients of `u_h`, cell after
/// cell (`(k+1)(k+2)/2` values each), into `buf`. `needed` receives the
/// required length; a null `buf` only queries it. A short buffer yields
/// [`PcdgStatus::BufferTooSmall`] and copies nothing.
///
/// # Safety
/// `buf` must be null or valid for `len` doubles; `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn pcdg_solution_coefficients(
    solution: *const PcdgSolution,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> PcdgStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        let total: usize = s.u_h.coeffs.iter().map(|c| c.len()).sum();
        if let Some(n) = needed.as_mut() {
            *n = total;
        }
        if buf.is_null() {
            return Ok(());
        }
        if len < total {
            return Err((
                PcdgStatus::BufferTooSmall,
                format!("buffer holds {len} values, {total} needed"),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buf, total);
        let mut pos = 0;
        for c in &s.u_h.coeffs {
            out[pos..pos + c.len()].copy_from_slice(c.as_slice());
            pos += c.len();
        }
        Ok(())
    })
}

/// Evaluates `u_h` restricted to `cell` at `(x, y)`.
///
/// # Safety
/// `solution` must be a live handle and `value` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn pcdg_solution_eval(
    solution: *const PcdgSolution,
    cell: usize,
    x: f64,
    y: f64,
    value: *mut f64,
) -> PcdgStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        let value = value.as_mut().ok_or_else(|| null("value"))?;
        if cell >= s.mesh.n_cells() {
            return Err((
                PcdgStatus::InvalidArgument,
                format!("cell {cell} out of range (mesh has {})", s.mesh.n_cells()),
            ));
        }
        *value = s.u_h.eval(&s.mesh, cell, [x, y]);
        Ok(())
    })
}

/// Copies the calling thread's last error message (NUL-terminated,
/// truncated to fit) into `buf` and returns the buffer size needed for the
/// full message, including the terminator. A null `buf` only queries.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn pcdg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pcdg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

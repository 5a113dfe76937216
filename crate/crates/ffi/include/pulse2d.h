#ifndef PULSE2D_H
#define PULSE2D_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum P2dComponent {
  P2D_COMPONENT_REPHASING = 0,
  P2D_COMPONENT_NONREPHASING = 1,
  P2D_COMPONENT_DQC = 2,
  P2D_COMPONENT_TOTAL = 3,
} P2dComponent;

typedef enum P2dDetection {
  P2D_DETECTION_HETERODYNE = 0,
  P2D_DETECTION_FLUORESCENCE = 1,
} P2dDetection;

// Result code of every fallible call.
typedef enum P2dStatus {
  P2D_STATUS_OK = 0,
  P2D_STATUS_NULL_ARGUMENT = 1,
  P2D_STATUS_INVALID_ARGUMENT = 2,
  P2D_STATUS_DIMENSION = 3,
  P2D_STATUS_VALIDATION = 4,
  P2D_STATUS_INTEGRATION = 5,
  P2D_STATUS_UNSUPPORTED = 6,
  P2D_STATUS_CALIBRATION = 7,
  P2D_STATUS_SINGULAR = 8,
  P2D_STATUS_AXIS_MISMATCH = 9,
  P2D_STATUS_PARSE = 10,
  P2D_STATUS_SWEEP = 11,
  P2D_STATUS_IO = 12,
  P2D_STATUS_FORMAT = 13,
  P2D_STATUS_PANIC = 14,
} P2dStatus;

// Opaque validated experiment configuration.
typedef struct P2dConfig P2dConfig;

// Opaque complex spectrum with its axes.
typedef struct P2dSpectrum P2dSpectrum;

// Opaque level structure.
typedef struct P2dSystem P2dSystem;

// Lindblad relaxation channel `from -> to` with rate in eV.
typedef struct P2dJump {
  size_t from;
  size_t to;
  double rate;
} P2dJump;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread; empty when none. The pointer
// stays valid until the next failing call on the same thread.
const char *p2d_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *p2d_version(void);

// The four-level dimer model with its default channels.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum P2dStatus p2d_system_dimer(struct P2dSystem **out);

// Builds an `n`-level system. `dipoles` is row-major `n x n`; `dephasing`
// holds one strength (eV) per level; zero entries add no channel.
//
// # Safety
// Array arguments must point to the stated number of readable elements and
// `out` to writable storage for one handle.
enum P2dStatus p2d_system_new(size_t n,
                              const double *energies,
                              const double *dipoles,
                              const uint32_t *excitation,
                              const double *yields,
                              const double *dephasing,
                              const struct P2dJump *jumps,
                              size_t n_jumps,
                              struct P2dSystem **out);

// Number of levels.
//
// # Safety
// `system` must be a live handle or null.
size_t p2d_system_dim(const struct P2dSystem *system);

// # Safety
// `system` must be null or a handle not yet freed.
void p2d_system_free(struct P2dSystem *system);

// Parses and validates a TOML configuration.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` writable.
enum P2dStatus p2d_config_parse(const char *toml, struct P2dConfig **out);

// Replaces the output directory of a configuration.
//
// # Safety
// `config` must be a live handle and `dir` a NUL-terminated string.
enum P2dStatus p2d_config_set_output(struct P2dConfig *config, const char *dir);

// Runs the configured sweep; writes the number of spectra produced.
//
// # Safety
// `config` must be a live handle; `n_spectra` may be null.
enum P2dStatus p2d_config_run(const struct P2dConfig *config, size_t *n_spectra);

// # Safety
// `config` must be null or a handle not yet freed.
void p2d_config_free(struct P2dConfig *config);

// Perturbative pathway spectrum on explicit axes (absolute eV). For
// fluorescence detection `t_acq > 0` integrates the emission over that
// window (fs) and `t_acq <= 0` reads populations right after the train.
//
// # Safety
// `system` must be a live handle, the axes must hold `n_tau` and `n_t`
// readable values and `out` must be writable.
enum P2dStatus p2d_dsfd_spectrum(const struct P2dSystem *system,
                                 enum P2dDetection detection,
                                 enum P2dComponent which,
                                 double waiting,
                                 double tau_f,
                                 double carrier,
                                 double t_acq,
                                 const double *omega_tau,
                                 size_t n_tau,
                                 const double *omega_t,
                                 size_t n_t,
                                 struct P2dSpectrum **out);

// Reads a spectrum file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum P2dStatus p2d_spectrum_read(const char *path, struct P2dSpectrum **out);

// Writes a spectrum file.
//
// # Safety
// `spectrum` must be a live handle and `path` a NUL-terminated string.
enum P2dStatus p2d_spectrum_write(const struct P2dSpectrum *spectrum, const char *path);

// Number of `omega_tau` rows and `omega_t` columns.
//
// # Safety
// `spectrum` must be a live handle; `rows` and `cols` writable.
enum P2dStatus p2d_spectrum_shape(const struct P2dSpectrum *spectrum, size_t *rows, size_t *cols);

// Copies the axes into caller buffers of `rows` and `cols` elements.
//
// # Safety
// `spectrum` must be a live handle and the buffers writable for the
// lengths reported by [`p2d_spectrum_shape`].
enum P2dStatus p2d_spectrum_axes(const struct P2dSpectrum *spectrum,
                                 double *omega_tau,
                                 double *omega_t);

// Copies real and imaginary parts in row-major order (`rows * cols` each).
//
// # Safety
// `spectrum` must be a live handle and both buffers writable for
// `rows * cols` values.
enum P2dStatus p2d_spectrum_data(const struct P2dSpectrum *spectrum, double *re, double *im);

// # Safety
// `spectrum` must be null or a handle not yet freed.
void p2d_spectrum_free(struct P2dSpectrum *spectrum);

// Relative L2 distance of the max-normalized real parts (against `b`) and
// the largest peak displacement in bins.
//
// # Safety
// `a` and `b` must be live handles; the outputs writable.
enum P2dStatus p2d_compare(const struct P2dSpectrum *a,
                           const struct P2dSpectrum *b,
                           double *relative_l2,
                           size_t *max_peak_shift);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PULSE2D_H */

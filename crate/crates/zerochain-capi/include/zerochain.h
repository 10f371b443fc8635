#ifndef ZEROCHAIN_H
#define ZEROCHAIN_H

/* Generated by cbindgen from zerochain-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Matrix-free operators selectable in `zc_apply` / `zc_opnorm`.
typedef enum ZcOp {
  ZC_OP_A = 0,
  ZC_OP_ABAR = 1,
  ZC_OP_H = 2,
  ZC_OP_A_ADJ = 3,
  ZC_OP_ABAR_ADJ = 4,
  ZC_OP_H_ADJ = 5,
  ZC_OP_AT_A = 6,
  ZC_OP_ABAR_T_ABAR = 7,
  ZC_OP_HT_H = 8,
  ZC_OP_A_AT = 9,
  ZC_OP_ABAR_ABAR_T = 10,
} ZcOp;

// Result of every fallible call.
typedef enum ZcStatus {
  ZC_STATUS_OK = 0,
  // A required pointer argument was null.
  ZC_STATUS_NULL_ARG = 1,
  // A buffer length did not match the instance dimension.
  ZC_STATUS_BAD_DIMENSION = 2,
  // Configuration rejected (invalid sizes, beta below its lower bound,
  // malformed JSON, or non-UTF-8 text).
  ZC_STATUS_BAD_CONFIG = 3,
  // An index argument was outside its valid range.
  ZC_STATUS_OUT_OF_RANGE = 4,
  // An iterative computation hit its iteration cap.
  ZC_STATUS_NO_CONVERGENCE = 5,
  // A non-finite value was encountered.
  ZC_STATUS_NUMERIC = 6,
  // Unexpected internal failure; see `zc_last_error_message`.
  ZC_STATUS_INTERNAL = 7,
  // A panic was caught at the boundary.
  ZC_STATUS_PANIC = 8,
} ZcStatus;

typedef struct ZcInstance ZcInstance;

typedef struct ZcOracle ZcOracle;

// Scalar facts about an instance, filled by `zc_instance_info`.
typedef struct ZcInstanceInfo {
  size_t m;
  size_t dbar;
  // Primal dimension `m * dbar`.
  size_t d;
  // Rows of the constraint operator.
  size_t n;
  // Rows of the coupling operator.
  size_t nbar;
  double eps;
  double lf;
  double beta;
  double scale;
  double a_norm;
  double abar_norm;
  double h_norm;
} ZcInstanceInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the most recent error message for this thread into `buf` as a
// NUL-terminated string. Returns the number of bytes required, including
// the terminator; if `buf` is null or `cap` is too small, nothing is
// copied and the caller should retry with the returned size.
size_t zc_last_error_message(char *buf, size_t cap);

// Build an instance from explicit parameters. `beta <= 0` selects the
// default coupling weight. On success writes a handle that must be
// released with `zc_instance_destroy`.
enum ZcStatus zc_instance_create(double eps,
                                 double lf,
                                 size_t m1,
                                 size_t m2,
                                 size_t dbar,
                                 double beta,
                                 struct ZcInstance **out);

// Build an instance from a JSON object with optional keys
// `eps, lf, m1, m2, dbar, beta`; omitted keys take the reference defaults.
// Unknown keys are rejected.
enum ZcStatus zc_instance_create_json(const char *json, struct ZcInstance **out);

// Release an instance handle. Null is a no-op.
void zc_instance_destroy(struct ZcInstance *inst);

// Fill `info` with the instance's dimensions and scalar constants.
enum ZcStatus zc_instance_info(const struct ZcInstance *inst, struct ZcInstanceInfo *info);

// Smooth objective `f0` at `x` (length `d`).
enum ZcStatus zc_f0(const struct ZcInstance *inst, const double *x, size_t x_len, double *out);

// Gradient of `f0` at `x`; `out` has length `d`.
enum ZcStatus zc_grad_f0(const struct ZcInstance *inst,
                         const double *x,
                         size_t x_len,
                         double *out,
                         size_t out_len);

// Coupling penalty `g` at `x` (length `d`).
enum ZcStatus zc_g_value(const struct ZcInstance *inst, const double *x, size_t x_len, double *out);

// Split-form penalty `gbar` at `y` (length `nbar`).
enum ZcStatus zc_gbar_value(const struct ZcInstance *inst,
                            const double *y,
                            size_t y_len,
                            double *out);

// Apply the operator selected by `op` (a `ZcOp` value). Input and output
// lengths must match that operator's shape for this instance.
enum ZcStatus zc_apply(const struct ZcInstance *inst,
                       uint32_t op,
                       const double *input,
                       size_t input_len,
                       double *out,
                       size_t out_len);

// Operator norm of the operator selected by `op` (a `ZcOp` value).
enum ZcStatus zc_opnorm(const struct ZcInstance *inst, uint32_t op, double *out);

// `i`-th closed-form eigenvalue of `H Hᵀ` (1-based, `1..=m-1`); each has
// multiplicity `dbar` in the dense spectrum.
enum ZcStatus zc_eig_hht(const struct ZcInstance *inst, size_t i, double *out);

// Joint condition number of the stacked row groups.
enum ZcStatus zc_kappa_joint(const struct ZcInstance *inst, double *out);

// Condition number of the constraint rows alone.
enum ZcStatus zc_kappa_a(const struct ZcInstance *inst, double *out);

// Proximal map of `eta * g` at `x`; `x` and `out` have length `d`.
enum ZcStatus zc_prox_g(const struct ZcInstance *inst,
                        const double *x,
                        size_t x_len,
                        double eta,
                        double *out,
                        size_t out_len);

// Proximal map of `eta * gbar` at `y`; `y` and `out` have length `nbar`.
enum ZcStatus zc_prox_gbar(const struct ZcInstance *inst,
                           const double *y,
                           size_t y_len,
                           double eta,
                           double *out,
                           size_t out_len);

// Stationarity residual of the fully constrained smooth problem at `x`.
enum ZcStatus zc_residual_ap(const struct ZcInstance *inst,
                             const double *x,
                             size_t x_len,
                             double *out);

// Computable lower bound on the stationarity residual at `x`.
enum ZcStatus zc_certificate_lb(const struct ZcInstance *inst,
                                const double *x,
                                size_t x_len,
                                double *out);

// Largest 1-based coordinate index active in any block of `x`
// (0 when `x` is the zero vector).
enum ZcStatus zc_support_front(const struct ZcInstance *inst,
                               const double *x,
                               size_t x_len,
                               size_t *out);

// Create a metered oracle over the instance. The handle must be released
// with `zc_oracle_destroy` and is not thread-safe.
enum ZcStatus zc_oracle_create(const struct ZcInstance *inst, struct ZcOracle **out);

// Release an oracle handle. Null is a no-op.
void zc_oracle_destroy(struct ZcOracle *oracle);

// Number of oracle calls made so far.
enum ZcStatus zc_oracle_count(const struct ZcOracle *oracle, size_t *out);

// First-kind oracle call: at `x` (length `d`), dual `z` (length `n`), and
// step `eta`, writes the gradient (`d`), the constraint image (`n`), its
// adjoint applied to `z` (`d`), and the prox of `eta * g` at `x` (`d`).
enum ZcStatus zc_oracle1(struct ZcOracle *oracle,
                         const double *x,
                         size_t x_len,
                         const double *z,
                         size_t z_len,
                         double eta,
                         double *grad_f0_out,
                         size_t grad_f0_len,
                         double *ax_out,
                         size_t ax_len,
                         double *at_z_out,
                         size_t at_z_len,
                         double *prox_out,
                         size_t prox_len);

// Second-kind oracle call: at `x` (length `d`), split variable `y`
// (length `nbar`), dual `z` (length `n`), and step `eta`, writes the
// gradient (`d`), the coupling image of `x` (`nbar`), the constraint
// image of `x` (`n`), the coupling adjoint of `y` (`d`), the constraint
// adjoint of `z` (`d`), and the prox of `eta * gbar` at `y` (`nbar`).
enum ZcStatus zc_oracle2(struct ZcOracle *oracle,
                         const double *x,
                         size_t x_len,
                         const double *y,
                         size_t y_len,
                         const double *z,
                         size_t z_len,
                         double eta,
                         double *grad_f0_out,
                         size_t grad_f0_len,
                         double *abar_x_out,
                         size_t abar_x_len,
                         double *ax_out,
                         size_t ax_len,
                         double *abar_t_y_out,
                         size_t abar_t_y_len,
                         double *at_z_out,
                         size_t at_z_len,
                         double *prox_out,
                         size_t prox_len);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* ZEROCHAIN_H */

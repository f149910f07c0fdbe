#ifndef RBMCI_H
#define RBMCI_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum RbmciStatus {
  RBMCI_STATUS_OK = 0,
  RBMCI_STATUS_PARSE = 1,
  RBMCI_STATUS_INDEX_OUT_OF_RANGE = 2,
  RBMCI_STATUS_CAPACITY = 3,
  RBMCI_STATUS_DOMAIN = 4,
  RBMCI_STATUS_SHAPE = 5,
  RBMCI_STATUS_PRECONDITION = 6,
  RBMCI_STATUS_NOT_CONVERGED = 7,
  RBMCI_STATUS_REFUSED = 8,
  RBMCI_STATUS_CONFIG = 9,
  RBMCI_STATUS_DEGENERATE = 10,
  RBMCI_STATUS_IO = 11,
  RBMCI_STATUS_SERIALIZATION = 12,
  RBMCI_STATUS_NULL_POINTER = 13,
  RBMCI_STATUS_INVALID_UTF8 = 14,
  RBMCI_STATUS_PANIC = 15,
} RbmciStatus;

// Integrals read from an FCIDUMP.
typedef struct RbmciIntegrals RbmciIntegrals;

// Result of a selection run.
typedef struct RbmciReport RbmciReport;

// Loop settings. Obtain defaults from [`rbmci_loop_config_default`].
typedef struct RbmciLoopConfig {
  size_t max_iterations;
  double prune_threshold;
  double stability_threshold;
  // 0 means one hidden unit per visible unit.
  size_t n_hidden;
  double beta;
  size_t sample_multiplier;
  size_t sample_cap;
  bool reinit_weights;
  bool keep_reference;
  uint64_t seed;
  // Use the dense solver instead of Davidson.
  bool dense_solver;
  double davidson_tol;
  size_t epochs;
  size_t batch_size;
  size_t gibbs_k;
  double learning_rate;
} RbmciLoopConfig;

// Message for the most recent failure on this thread, or null.
// The pointer stays valid until the next call into this library on the same thread.
const char *rbmci_last_error_message(void);

// Read an FCIDUMP file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum RbmciStatus rbmci_integrals_load(const char *path, struct RbmciIntegrals **out);

// Parse FCIDUMP text.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum RbmciStatus rbmci_integrals_parse(const char *text, struct RbmciIntegrals **out);

// # Safety
// `handle` must come from this library and not be used afterwards. Null is ignored.
void rbmci_integrals_free(struct RbmciIntegrals *handle);

// Orbital and electron counts.
//
// # Safety
// `handle` must be live; the output pointers must be valid.
enum RbmciStatus rbmci_integrals_dims(const struct RbmciIntegrals *handle,
                                      size_t *n_orbitals,
                                      size_t *n_alpha,
                                      size_t *n_beta);

// Exact ground-state energy over the full space. Refused when the space exceeds `cap` determinants.
//
// # Safety
// `handle` must be live and `energy` valid.
enum RbmciStatus rbmci_fci_energy(const struct RbmciIntegrals *handle,
                                  uint64_t cap,
                                  double *energy);

struct RbmciLoopConfig rbmci_loop_config_default(void);

// Run the selection loop. Reaching the iteration limit is not a failure; check
// [`rbmci_report_converged`].
//
// # Safety
// `handle` must be live; `config` and `out` must be valid pointers.
enum RbmciStatus rbmci_run_selection(const struct RbmciIntegrals *handle,
                                     const struct RbmciLoopConfig *config,
                                     struct RbmciReport **out);

// # Safety
// `report` must come from this library and not be used afterwards. Null is ignored.
void rbmci_report_free(struct RbmciReport *report);

// Final variational energy, or NaN for a null handle.
//
// # Safety
// `report` must be null or live.
double rbmci_report_energy(const struct RbmciReport *report);

// # Safety
// `report` must be null or live.
size_t rbmci_report_iterations(const struct RbmciReport *report);

// # Safety
// `report` must be null or live.
bool rbmci_report_converged(const struct RbmciReport *report);

// Size of the final determinant set.
//
// # Safety
// `report` must be null or live.
size_t rbmci_report_n_determinants(const struct RbmciReport *report);

// Copy per-iteration energies into `buffer`. `written` receives the number of iterations;
// fails with `Shape` if `capacity` is smaller.
//
// # Safety
// `report` must be live, `buffer` must hold `capacity` doubles (may be null when 0),
// `written` must be valid.
enum RbmciStatus rbmci_report_iteration_energies(const struct RbmciReport *report,
                                                 double *buffer,
                                                 size_t capacity,
                                                 size_t *written);

// The full report as JSON. Release with [`rbmci_string_free`].
//
// # Safety
// `report` must be live and `out` valid.
enum RbmciStatus rbmci_report_to_json(const struct RbmciReport *report, char **out);

// # Safety
// `s` must come from this library and not be used afterwards. Null is ignored.
void rbmci_string_free(char *s);

// Number of determinants in the full space of `n_electrons` paired electrons over
// `n_orbitals`. Fails with `Capacity` if the count does not fit in 64 bits.
//
// # Safety
// `out` must be valid.
enum RbmciStatus rbmci_estimate_fci_size(size_t n_orbitals, size_t n_electrons, uint64_t *out);

// Potential scale reduction factor over `n_chains` chains of `chain_length` draws,
// stored chain after chain in `values`.
//
// # Safety
// `values` must hold `n_chains * chain_length` doubles and `statistic` must be valid.
enum RbmciStatus rbmci_gelman_rubin(const double *values,
                                    size_t n_chains,
                                    size_t chain_length,
                                    double *statistic);

#endif  /* RBMCI_H */

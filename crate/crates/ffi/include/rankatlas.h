#ifndef RANKATLAS_H
#define RANKATLAS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RaStatus {
  RA_STATUS_OK = 0,
  RA_STATUS_NULL_POINTER = 1,
  RA_STATUS_DOMAIN = 2,
  RA_STATUS_DIMENSION = 3,
  RA_STATUS_NOT_IN_V = 4,
  RA_STATUS_SINGULAR = 5,
  RA_STATUS_CONTRADICTION = 6,
  RA_STATUS_BUDGET = 7,
  RA_STATUS_PARSE = 8,
  RA_STATUS_IO = 9,
  RA_STATUS_PANIC = 10,
} RaStatus;

typedef enum RaVerdictKind {
  RA_VERDICT_KIND_RANK_P = 0,
  RA_VERDICT_KIND_RANK_EXCEEDS_P = 1,
  RA_VERDICT_KIND_INCONCLUSIVE = 2,
} RaVerdictKind;

typedef struct RaBilinear RaBilinear;

typedef struct RaBoundsTable RaBoundsTable;

typedef struct RaTensor RaTensor;

typedef struct RaVerdict RaVerdict;

#ifdef __cplusplus
extern "C" {
#endif

const char *ra_last_error_message(void);

const char *ra_version(void);

void ra_string_free(char *s);

RaStatus ra_tensor_new(size_t d1, size_t d2, size_t d3, const double *data, size_t len, RaTensor **out);

RaStatus ra_tensor_parse(const char *text, RaTensor **out);

RaStatus ra_tensor_dims(const RaTensor *t, size_t *d1, size_t *d2, size_t *d3);

RaStatus ra_tensor_to_json(const RaTensor *t, char **out);

void ra_tensor_free(RaTensor *t);

RaStatus ra_bilinear_hypercomplex(size_t d, RaBilinear **out);

RaStatus ra_bilinear_convolve(const RaBilinear *g, size_t m, size_t n, RaBilinear **out);

RaStatus ra_bilinear_restrict(const RaBilinear *f, size_t a, size_t b, RaBilinear **out);

RaStatus ra_bilinear_to_tensor(const RaBilinear *f, RaTensor **out);

void ra_bilinear_free(RaBilinear *f);

RaStatus ra_afcr_margin(const RaTensor *y, size_t restarts, uint64_t seed, double *margin, double *relative, int *is_afcr);

RaStatus ra_certify(const RaTensor *t, size_t restarts, uint64_t seed, RaVerdict **out);

RaStatus ra_verdict_kind(const RaVerdict *v, RaVerdictKind *out);

RaStatus ra_verdict_residual(const RaVerdict *v, double *out);

RaStatus ra_verdict_to_json(const RaVerdict *v, char **out);

void ra_verdict_free(RaVerdict *v);

RaStatus ra_bounds_table_build(size_t max_dim, RaBoundsTable **out);

RaStatus ra_bounds(const RaBoundsTable *t, size_t m, size_t n, size_t *lower, size_t *upper);

void ra_bounds_table_free(RaBoundsTable *t);

RaStatus ra_classify(size_t m, size_t n, size_t p, const RaBoundsTable *table, char **out);

uint64_t ra_circ(uint64_t r, uint64_t s);

RaStatus ra_hurwitz_radon(uint64_t n, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif

#endif  /* RANKATLAS_H */

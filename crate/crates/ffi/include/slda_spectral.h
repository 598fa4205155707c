#ifndef SLDA_SPECTRAL_H
#define SLDA_SPECTRAL_H

/* Generated by cbindgen from slda-spectral-ffi; do not edit by hand. */

#include <stdint.h>
#include <stddef.h>
#define SLDA_API

/**
 * Operation succeeded.
 */
#define SLDA_OK 0

/**
 * Unspecified failure (see `slda_last_error_message`).
 */
#define SLDA_ERR_OTHER 1

/**
 * Invalid argument or configuration.
 */
#define SLDA_ERR_INVALID_ARGUMENT 2

/**
 * The second moment cannot support the requested topic count.
 */
#define SLDA_ERR_RANK_DEFICIENT 10

/**
 * The whitened tensor admits no decomposition at the requested topic
 * count (negative eigenvalue).
 */
#define SLDA_ERR_NEGATIVE_EIGENVALUE 11

/**
 * File I/O or parse failure.
 */
#define SLDA_ERR_IO 12

/**
 * Which recovery pipeline to run.
 */
typedef enum SldaMethod {
  /**
   * Topic recovery from word moments, then regression weights and noise.
   */
  SLDA_METHOD_TWO_STAGE = 0,
  /**
   * One decomposition of the stacked word/response moments.
   */
  SLDA_METHOD_JOINT = 1,
} SldaMethod;

/**
 * How the second moment is whitened.
 */
typedef enum SldaWhitening {
  /**
   * Truncated eigendecomposition of the full moment matrix.
   */
  SLDA_WHITENING_EXACT = 0,
  /**
   * Gaussian-sketch whitening (width `oversample`·`num_topics`).
   */
  SLDA_WHITENING_RANDOMIZED = 1,
} SldaWhitening;

/**
 * A bag-of-words corpus with per-document responses (opaque handle).
 */
typedef struct SldaCorpus SldaCorpus;

/**
 * A supervised LDA model (opaque handle).
 */
typedef struct SldaModelHandle SldaModelHandle;

/**
 * Recovery settings; obtain defaults from `slda_recover_options_default`
 * and adjust fields as needed.
 */
typedef struct SldaRecoverOptions {
  enum SldaMethod method;
  /**
   * Dirichlet concentration α₀ (assumed known).
   */
  double alpha0;
  uint32_t num_topics;
  /**
   * Tensor power method restarts per topic (L).
   */
  uint32_t restarts;
  /**
   * Power iteration sweeps (T).
   */
  uint32_t iters;
  /**
   * Assumed response noise (joint method only).
   */
  double sigma;
  /**
   * Word-coordinate scaling constant (joint method only).
   */
  double scale;
  enum SldaWhitening whitening;
  /**
   * Sketch width multiplier for randomized whitening.
   */
  uint32_t oversample;
  /**
   * Relative rank tolerance for whitening.
   */
  double rank_tolerance;
  uint64_t seed;
} SldaRecoverOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *slda_version(void);

/**
 * Message describing the current thread's most recent failure. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *slda_last_error_message(void);

/**
 * Read a corpus from a bag-of-words file, optionally attaching responses
 * (one real per line; pass NULL to leave all responses at zero). On
 * success `*out` owns the corpus; release it with `slda_corpus_free`.
 */
int slda_corpus_read(const char *docword_path, const char *responses_path, struct SldaCorpus **out);

/**
 * Release a corpus created by this library. NULL is ignored.
 */
void slda_corpus_free(struct SldaCorpus *corpus);

/**
 * Number of documents, or 0 if the handle is NULL.
 */
size_t slda_corpus_num_docs(const struct SldaCorpus *corpus);

/**
 * Vocabulary size, or 0 if the handle is NULL.
 */
size_t slda_corpus_vocab_size(const struct SldaCorpus *corpus);

/**
 * Sample a ground-truth model (uniform-normalized topics, standard-normal
 * weights, α₀ spread evenly) and generate a synthetic corpus from it.
 * Either output pointer may be NULL to skip that output.
 */
int slda_generate(uint32_t num_topics,
                  size_t vocab_size,
                  size_t num_docs,
                  uint32_t doc_len,
                  double alpha0,
                  double sigma,
                  uint64_t seed,
                  struct SldaModelHandle **out_model,
                  struct SldaCorpus **out_corpus);

/**
 * Read a model from a JSON model file. On success `*out` owns the model;
 * release it with `slda_model_free`.
 */
int slda_model_read(const char *path, struct SldaModelHandle **out);

/**
 * Write a model to a JSON model file.
 */
int slda_model_write(const struct SldaModelHandle *model, const char *path);

/**
 * Release a model created by this library. NULL is ignored.
 */
void slda_model_free(struct SldaModelHandle *model);

/**
 * Number of topics, or 0 if the handle is NULL.
 */
uint32_t slda_model_num_topics(const struct SldaModelHandle *model);

/**
 * Vocabulary size, or 0 if the handle is NULL.
 */
size_t slda_model_vocab_size(const struct SldaModelHandle *model);

/**
 * Response noise level, or NaN if the handle is NULL.
 */
double slda_model_sigma(const struct SldaModelHandle *model);

/**
 * Copy the Dirichlet prior into `out` (`num_topics` doubles).
 */
int slda_model_alpha(const struct SldaModelHandle *model, double *out);

/**
 * Copy the regression weights into `out` (`num_topics` doubles).
 */
int slda_model_eta(const struct SldaModelHandle *model, double *out);

/**
 * Copy the topic-word matrix into `out` (`vocab_size`·`num_topics`
 * doubles, column-major: topic `t` occupies entries
 * `[t·vocab_size, (t+1)·vocab_size)`).
 */
int slda_model_topics(const struct SldaModelHandle *model, double *out);

/**
 * Default recovery settings for a method: L = T = 100, scale 100,
 * assumed σ 0, exact whitening with oversample 10, relative rank
 * tolerance 1e-10, seed 0.
 */
struct SldaRecoverOptions slda_recover_options_default(enum SldaMethod method,
                                                       double alpha0,
                                                       uint32_t num_topics);

/**
 * Recover model parameters from a corpus. On success `*out` owns the
 * recovered model. Failure modes worth branching on:
 * `SLDA_ERR_RANK_DEFICIENT` (lower `num_topics`) and
 * `SLDA_ERR_NEGATIVE_EIGENVALUE` (moments inconsistent with
 * `num_topics`).
 */
int slda_recover(const struct SldaCorpus *corpus,
                 const struct SldaRecoverOptions *options,
                 struct SldaModelHandle **out);

/**
 * Infer a document's topic mixture by collapsed Gibbs sampling. The
 * document is `num_entries` (word id, count) pairs; duplicates are
 * aggregated. Writes `num_topics` doubles (a point on the simplex) to
 * `out_mixture`. Deterministic given the seed.
 */
int slda_infer_mixture(const struct SldaModelHandle *model,
                       const uint32_t *words,
                       const uint32_t *counts,
                       size_t num_entries,
                       uint32_t burnin,
                       uint32_t samples,
                       uint64_t seed,
                       double *out_mixture);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLDA_SPECTRAL_H */

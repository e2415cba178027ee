#ifndef NSPM_H
#define NSPM_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NspmStatus {
  NSPM_STATUS_OK = 0,
  NSPM_STATUS_NULL_POINTER = 1,
  NSPM_STATUS_INVALID_UTF8 = 2,
  NSPM_STATUS_IO = 3,
  NSPM_STATUS_FORMAT = 4,
  NSPM_STATUS_DECODE = 5,
  NSPM_STATUS_INVALID_ARGUMENT = 6,
  NSPM_STATUS_PANIC = 7,
} NspmStatus;

/**
 * Converts between SPARQL text and token sequences.
 */
typedef struct NspmCodec NspmCodec;

/**
 * A loaded translation model.
 */
typedef struct NspmModel NspmModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, empty after a success.
 * Valid until the next library call on the same thread.
 */
const char *nspm_last_error(void);

/**
 * Library version, a static string.
 */
const char *nspm_version(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` is null or was returned by this library and not yet freed.
 */
void nspm_string_free(char *s);

/**
 * Loads a checkpoint into `*out`.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is valid for a pointer write.
 */
enum NspmStatus nspm_model_load(const char *path, struct NspmModel **out);

/**
 * # Safety
 * `model` is null or a handle from [`nspm_model_load`] not yet freed.
 */
void nspm_model_free(struct NspmModel *model);

/**
 * Greedy translation of `question` into space-separated query tokens.
 *
 * # Safety
 * `model` is a live handle; `question` is NUL-terminated; `out` is valid
 * for a pointer write. The result is freed with [`nspm_string_free`].
 */
enum NspmStatus nspm_model_translate_tokens(const struct NspmModel *model,
                                            const char *question,
                                            size_t max_len,
                                            char **out);

/**
 * Translation of `question` decoded into SPARQL text. Returns
 * `NSPM_STATUS_DECODE` when the model output is not a valid query.
 *
 * # Safety
 * As [`nspm_model_translate_tokens`].
 */
enum NspmStatus nspm_model_translate_sparql(const struct NspmModel *model,
                                            const char *question,
                                            size_t max_len,
                                            char **out);

/**
 * Codec with the default prefix table. Never null.
 */
struct NspmCodec *nspm_codec_new(void);

/**
 * # Safety
 * `codec` is null or a handle from [`nspm_codec_new`] not yet freed.
 */
void nspm_codec_free(struct NspmCodec *codec);

/**
 * Parses SPARQL text and writes its space-separated token encoding.
 *
 * # Safety
 * `codec` is a live handle; `sparql` is NUL-terminated; `out` is valid
 * for a pointer write. The result is freed with [`nspm_string_free`].
 */
enum NspmStatus nspm_codec_encode(const struct NspmCodec *codec, const char *sparql, char **out);

/**
 * Decodes a space-separated token sequence into SPARQL text.
 *
 * # Safety
 * As [`nspm_codec_encode`].
 */
enum NspmStatus nspm_codec_decode(const struct NspmCodec *codec, const char *tokens, char **out);

/**
 * Corpus BLEU of `n` space-separated candidate/reference pairs.
 *
 * # Safety
 * `candidates` and `references` point to `n` NUL-terminated strings
 * each; `out` is valid for a write.
 */
enum NspmStatus nspm_bleu(const char *const *candidates,
                          const char *const *references,
                          size_t n,
                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NSPM_H */

#ifndef CONTACT_TRACE_H
#define CONTACT_TRACE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum CtStatus {
  CT_STATUS_OK = 0,
  CT_STATUS_NULL_POINTER = 1,
  CT_STATUS_INVALID_ARGUMENT = 2,
  CT_STATUS_BUFFER_TOO_SMALL = 3,
  CT_STATUS_PARSE = 4,
  CT_STATUS_CRYPTO = 5,
  CT_STATUS_SIMULATION = 6,
  CT_STATUS_PANIC = 99,
} CtStatus;

/**
 * Selects overhead rows. `All` prints every protocol.
 */
typedef enum CtOverheadProtocol {
  CT_OVERHEAD_PROTOCOL_MSG1 = 0,
  CT_OVERHEAD_PROTOCOL_MSG2 = 1,
  CT_OVERHEAD_PROTOCOL_SET = 2,
  CT_OVERHEAD_PROTOCOL_ALL = 3,
} CtOverheadProtocol;

/**
 * Homomorphic key pair with its own deterministic randomness.
 */
typedef struct CtAheKeyPair CtAheKeyPair;

/**
 * Completed simulation. Text views stay valid until the handle is freed.
 */
typedef struct CtReport CtReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *ct_last_error(void);

/**
 * Writes `out_cap` bytes of the counter-mode PRG for `(seed, counter)`.
 */
enum CtStatus ct_ctr_prg(const uint8_t *seed16, uint64_t counter, uint8_t *out, size_t out_cap);

/**
 * Generates a key pair; `rng_seed` drives keygen and every later
 * randomized operation on the handle.
 */
enum CtStatus ct_ahe_keygen(uint32_t modulus_bits, uint64_t rng_seed, struct CtAheKeyPair **out);

void ct_ahe_keypair_free(struct CtAheKeyPair *keys);

/**
 * Length in bytes of every framed ciphertext under this key.
 */
enum CtStatus ct_ahe_ciphertext_len(const struct CtAheKeyPair *keys, size_t *out_len);

enum CtStatus ct_ahe_encrypt(struct CtAheKeyPair *keys,
                             uint64_t value,
                             uint8_t *out,
                             size_t out_cap,
                             size_t *out_len);

/**
 * `enc(r * (m0 - m1))` for fresh nonzero `r`.
 */
enum CtStatus ct_ahe_blinded_difference(struct CtAheKeyPair *keys,
                                        const uint8_t *c0,
                                        size_t c0_len,
                                        const uint8_t *c1,
                                        size_t c1_len,
                                        uint8_t *out,
                                        size_t out_cap,
                                        size_t *out_len);

enum CtStatus ct_ahe_add(struct CtAheKeyPair *keys,
                         const uint8_t *c0,
                         size_t c0_len,
                         const uint8_t *c1,
                         size_t c1_len,
                         uint8_t *out,
                         size_t out_cap,
                         size_t *out_len);

/**
 * Sets `*is_zero` to 1 when the ciphertext decrypts to 0, else 0.
 */
enum CtStatus ct_ahe_decrypt_is_zero(const struct CtAheKeyPair *keys,
                                     const uint8_t *c,
                                     size_t c_len,
                                     uint8_t *is_zero);

/**
 * Decrypts a plaintext that fits in 64 bits.
 */
enum CtStatus ct_ahe_decrypt_u64(const struct CtAheKeyPair *keys,
                                 const uint8_t *c,
                                 size_t c_len,
                                 uint64_t *value);

/**
 * Tab-separated overhead table for the given scale and default parameters.
 */
enum CtStatus ct_overhead_text(enum CtOverheadProtocol protocol,
                               uint64_t users,
                               uint64_t encounters_per_day,
                               uint64_t infections_per_day,
                               uint8_t *out,
                               size_t out_cap,
                               size_t *out_len);

/**
 * Parses `key = value` scenario text and runs it to completion.
 */
enum CtStatus ct_simulate(const uint8_t *scenario, size_t scenario_len, struct CtReport **out);

void ct_report_free(struct CtReport *report);

/**
 * NUL-terminated report text owned by the handle; null for a null handle.
 */
const char *ct_report_text(const struct CtReport *report);

const char *ct_report_probes_csv(const struct CtReport *report);

/**
 * 1 when every probe contract holds, 0 otherwise or for a null handle.
 */
uint8_t ct_report_contracts_hold(const struct CtReport *report);

enum CtStatus ct_report_detection(const struct CtReport *report, double *precision, double *recall);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONTACT_TRACE_H */

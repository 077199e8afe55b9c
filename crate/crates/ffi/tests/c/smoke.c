#include <math.h>
#include <stdio.h>
#include <string.h>

#include "cfmimo.h"

#define CHECK(cond)                                                    \
    do {                                                               \
        if (!(cond)) {                                                 \
            fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
            return 1;                                                  \
        }                                                              \
    } while (0)

int main(void) {
    CfmLdpc *code = NULL;
    CHECK(cfm_ldpc_default(&code) == CFM_STATUS_OK);
    size_t n = cfm_ldpc_length(code);
    size_t k = cfm_ldpc_message_len(code);
    CHECK(n == 256 && k == 128);

    unsigned char msg[128], cw[256], bits[256];
    double llr[256];
    for (size_t i = 0; i < k; i++) msg[i] = (unsigned char)((i * 7 + 3) % 5 == 0);
    CHECK(cfm_ldpc_encode(code, msg, k, cw, n) == CFM_STATUS_OK);
    for (size_t i = 0; i < n; i++) llr[i] = cw[i] ? -4.0 : 4.0;
    llr[10] = -llr[10];
    uint32_t iters = 0;
    bool conv = false;
    CHECK(cfm_ldpc_decode(code, llr, n, 20, bits, NULL, &iters, &conv) == CFM_STATUS_OK);
    CHECK(conv);
    CHECK(memcmp(bits, cw, n) == 0);

    CHECK(cfm_ldpc_encode(code, msg, 3, cw, n) == CFM_STATUS_INVALID_ARGUMENT);
    CHECK(cfm_last_error() != NULL);
    CHECK(cfm_ldpc_encode(NULL, msg, k, cw, n) == CFM_STATUS_NULL_POINTER);
    cfm_ldpc_free(code);

    CHECK(fabs(cfm_box_plus(2.0, 3.0) - log((1.0 + exp(5.0)) / (exp(2.0) + exp(3.0)))) < 1e-12);

    CfmSimulator *sim = NULL;
    const char *cfg = "num_aps = 8\nnum_ues = 2\nsnr_db = [10.0]\ntrials = 2\nidd_iters = 1\n";
    CHECK(cfm_simulator_new(cfg, &sim) == CFM_STATUS_OK);
    CfmRecords *recs = NULL;
    CHECK(cfm_simulator_sweep(sim, &recs) == CFM_STATUS_OK);
    CHECK(cfm_records_len(recs) == 6);
    CfmBerPoint p;
    CHECK(cfm_records_get(recs, 0, &p) == CFM_STATUS_OK);
    CHECK(p.trials == 2 && p.bits_total == 2 * 2 * 128);
    CHECK(cfm_records_get(recs, 6, &p) == CFM_STATUS_INVALID_ARGUMENT);
    cfm_records_free(recs);
    cfm_simulator_free(sim);

    CHECK(cfm_simulator_new("bogus_key = 1\n", &sim) == CFM_STATUS_CONFIG);
    CHECK(sim == NULL);
    printf("ok\n");
    return 0;
}

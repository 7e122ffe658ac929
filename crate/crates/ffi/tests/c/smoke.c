#include <stdio.h>
#include <string.h>
#include "uda.h"

#define CHECK(call)                                                      \
    do {                                                                 \
        UdaStatus st_ = (call);                                          \
        if (st_ != UDA_STATUS_OK) {                                      \
            fprintf(stderr, "%s -> %d: %s\n", #call, st_, uda_last_error()); \
            return 1;                                                    \
        }                                                                \
    } while (0)

int main(void) {
    UdaState *state = NULL;
    UdaSubsystems *pairs = NULL;
    UdaVerdict *verdict = NULL;
    UdaVerdictKind kind;
    size_t dim = 0;
    double thr = 0.0;
    char *json = NULL;

    CHECK(uda_state_from_json("{\"kind\": \"dicke\", \"n\": 3, \"k\": 1}", &state));
    CHECK(uda_subsystems_from_json("{\"n\": 3, \"subsets\": [[1, 2], [1, 3], [2, 3]]}", &pairs));
    CHECK(uda_kernel_dim(pairs, &dim));
    CHECK(uda_certify(state, pairs, &verdict));
    CHECK(uda_verdict_kind(verdict, &kind));
    CHECK(uda_verdict_to_json(verdict, &json));
    CHECK(uda_gme_threshold(4, 2, &thr));
    printf("dim=%zu kind=%d threshold=%.12f has_verdict=%d\n", dim, (int)kind, thr,
           strstr(json, "\"verdict\":\"ROBUST\"") != NULL);

    if (uda_state_from_json("{\"kind\": \"dicke\"}", &state) != UDA_STATUS_PARSE_ERROR) return 2;
    if (uda_last_error() == NULL) return 3;

    uda_string_free(json);
    uda_verdict_free(verdict);
    uda_subsystems_free(pairs);
    uda_state_free(state);
    return 0;
}

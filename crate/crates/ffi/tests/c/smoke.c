#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "zerophase.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        ZpStatus s_ = (call);                                              \
        if (s_ != ZP_STATUS_OK) {                                          \
            char msg_[256];                                                \
            zp_last_error_message(msg_, sizeof msg_);                      \
            fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s_, msg_); \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    ZpSignal *sig = NULL;
    CHECK(zp_signal_two_tone(500.0, 1500.0, 8000.0, 0.03, &sig));

    ZpWindow win = {ZP_WINDOW_FAMILY_GAUSSIAN, 0.001};
    ZpGridParams params = {2, 0, 0.0};

    ZpStftGrid *grid = NULL;
    CHECK(zp_stft(sig, &win, ZP_VARIANT_G, &params, ZP_CONVENTION_V, &grid));
    size_t nf = 0, nt = 0;
    CHECK(zp_grid_dims(grid, &nf, &nt));
    double *re = malloc(nf * nt * sizeof *re);
    double *im = malloc(nf * nt * sizeof *im);
    CHECK(zp_grid_copy_coeffs(grid, re, im, nf * nt));

    ZpZeroList *zeros = NULL;
    CHECK(zp_zeros_analyze(sig, &win, &params, &zeros));
    size_t classified = 0;
    for (size_t i = 0; i < zp_zero_list_len(zeros); i++) {
        ZpZero z;
        CHECK(zp_zero_list_get(zeros, i, &z));
        if (!z.classified) continue;
        if (!z.pattern_ok || fabs(z.omega_hz - 1000.0) > 1e-6 || z.det_sign != -1) {
            fprintf(stderr, "unexpected zero at %g s, %g Hz\n", z.x_s, z.omega_hz);
            return 1;
        }
        classified++;
    }

    ZpWindow rect = {ZP_WINDOW_FAMILY_RECTANGULAR, 0.004};
    ZpStftGrid *bad = NULL;
    ZpStatus s = zp_stft(sig, &rect, ZP_VARIANT_NEG_DG, &params, ZP_CONVENTION_V, &bad);
    if (s != ZP_STATUS_UNSUPPORTED || bad != NULL || zp_last_error_message(NULL, 0) == 0) {
        fprintf(stderr, "rectangular derivative window accepted\n");
        return 1;
    }

    printf("zerophase %s: %zu x %zu grid, %zu classified zeros\n", zp_version(), nf, nt, classified);
    free(re);
    free(im);
    zp_zero_list_free(zeros);
    zp_grid_free(grid);
    zp_signal_free(sig);
    return classified > 0 ? 0 : 1;
}

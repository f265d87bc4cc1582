#include <math.h>
#include <stdio.h>
#include "nfkit.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s (line %d)\n", #cond, __LINE__); return 1; } } while (0)

int main(void) {
    double d = 0.0;
    CHECK(nf_rayleigh_distance(sqrt(2.0), 299792458.0 / 28e9, &d) == NF_STATUS_OK);
    CHECK(d > 371.0 && d < 376.0);
    CHECK(nf_rayleigh_distance(-1.0, 0.01, &d) == NF_STATUS_INVALID_ARGUMENT);
    char msg[128];
    CHECK(nf_last_error_message(msg, sizeof msg) > 0);

    NfArray *a = NULL;
    CHECK(nf_array_ula(8, 0.005, &a) == NF_STATUS_OK);
    size_t n = 0;
    CHECK(nf_array_len(a, &n) == NF_STATUS_OK && n == 8);
    double re[8], im[8];
    CHECK(nf_nearfield_steering(a, 0.0, 0.0, 1.0, 0.01, false, re, im, 8) == NF_STATUS_OK);
    CHECK(fabs(re[0] * re[0] + im[0] * im[0] - 1.0) < 1e-12);
    CHECK(nf_nearfield_steering(a, 0.0, 0.0, 1.0, 0.01, false, re, im, 4) == NF_STATUS_BUFFER_TOO_SMALL);
    CHECK(nf_max_phase_error(a, 0.0, 0.0, 1.0, 0.01, NF_APPROX_PARABOLIC, &d) == NF_STATUS_OK);
    nf_array_free(a);

    NfPositioningSummary s;
    CHECK(nf_positioning_experiment(64, 299792458.0 / 300e9 / 2.0, 15.0, 200, 1, 3.0, 3.0, &s) == NF_STATUS_OK);
    CHECK(s.cep_m > 0.5 && s.cep_m < 1.5);
    puts("ok");
    return 0;
}

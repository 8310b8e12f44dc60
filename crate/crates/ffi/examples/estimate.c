/* Build: cc -I crates/ffi/include crates/ffi/examples/estimate.c -L target/debug -ljps_ffi -o estimate */
#include <stdio.h>
#include "jps.h"

int main(void) {
    size_t values[] = {1, 1, 2, 2, 2, 3, 3, 3, 3};
    size_t ranks[] = {1, 1, 1, 2, 2, 2, 3, 3, 3};
    JpsSampleHandle *sample = NULL;
    JpsEstimateHandle *est = NULL;
    char msg[256];

    if (jps_sample_new(values, ranks, 9, 3, 3, &sample) != JPS_STATUS_OK) {
        jps_last_error_message(msg, sizeof msg);
        fprintf(stderr, "sample: %s\n", msg);
        return 1;
    }
    if (jps_estimate(sample, JPS_METHOD_ISO_STAR, &est) != JPS_STATUS_OK) {
        jps_last_error_message(msg, sizeof msg);
        fprintf(stderr, "estimate: %s\n", msg);
        jps_sample_free(sample);
        return 1;
    }
    double p[3];
    jps_estimate_proportions(est, p, 3);
    printf("jps %s: p = %.4f %.4f %.4f\n", jps_version(), p[0], p[1], p[2]);
    jps_estimate_free(est);
    jps_sample_free(sample);
    return 0;
}

/* Minimal C consumer: build an instance, take one metered oracle call,
 * and read a stationarity certificate. Build (from the repo root):
 *
 *   cargo build -p zerochain-capi --release
 *   cc crates/zerochain-capi/examples/demo.c \
 *      -Icrates/zerochain-capi/include \
 *      target/release/libzerochain_capi.a -lm -lpthread -ldl -o demo
 */
#include <stdio.h>
#include <stdlib.h>
#include "zerochain.h"

static int die(const char *where) {
    char msg[512];
    zc_last_error_message(msg, sizeof msg);
    fprintf(stderr, "%s: %s\n", where, msg);
    return 1;
}

int main(void) {
    ZcInstance *inst = NULL;
    /* eps, lf, m1, m2, dbar; beta <= 0 picks the default coupling weight */
    if (zc_instance_create(0.1, 1.0, 2, 2, 5, -1.0, &inst) != ZC_STATUS_OK)
        return die("create");

    ZcInstanceInfo info;
    if (zc_instance_info(inst, &info) != ZC_STATUS_OK)
        return die("info");
    printf("m=%zu d=%zu n=%zu nbar=%zu beta=%.6f |A|=%.6f\n",
           info.m, info.d, info.n, info.nbar, info.beta, info.a_norm);

    double *x = calloc(info.d, sizeof *x);
    double *z = calloc(info.n, sizeof *z);
    double *grad = malloc(info.d * sizeof *grad);
    double *ax = malloc(info.n * sizeof *ax);
    double *atz = malloc(info.d * sizeof *atz);
    double *prox = malloc(info.d * sizeof *prox);

    double residual;
    if (zc_residual_ap(inst, x, info.d, &residual) != ZC_STATUS_OK)
        return die("residual");
    printf("residual at origin = %.12f\n", residual);

    ZcOracle *oracle = NULL;
    if (zc_oracle_create(inst, &oracle) != ZC_STATUS_OK)
        return die("oracle");
    if (zc_oracle1(oracle, x, info.d, z, info.n, 0.1,
                   grad, info.d, ax, info.n, atz, info.d,
                   prox, info.d) != ZC_STATUS_OK)
        return die("oracle1");
    size_t calls = 0;
    zc_oracle_count(oracle, &calls);
    printf("first gradient coordinate = %.12f after %zu call(s)\n",
           grad[0], calls);

    /* deliberate misuse: short output buffer */
    if (zc_grad_f0(inst, x, info.d, grad, info.d - 1) != ZC_STATUS_BAD_DIMENSION)
        return 1;
    char msg[256];
    zc_last_error_message(msg, sizeof msg);
    printf("short buffer rejected: %s\n", msg);

    free(x); free(z); free(grad); free(ax); free(atz); free(prox);
    zc_oracle_destroy(oracle);
    zc_instance_destroy(inst);
    puts("ok");
    return 0;
}

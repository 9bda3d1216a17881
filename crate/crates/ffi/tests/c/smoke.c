#include <math.h>
#include <stdio.h>
#include <string.h>

#include "confnet.h"

int main(void) {
    const char *names[] = {"r", "t"};
    ConfnetExpr *e = NULL;
    if (confnet_expr_parse("r^2 * sin(t)", names, 2, &e) != CONFNET_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", confnet_last_error());
        return 1;
    }
    double p[2] = {2.0, 0.5}, v, g[2], h[4];
    if (confnet_expr_eval(e, p, &v, g, h) != CONFNET_STATUS_OK) {
        return 1;
    }
    confnet_expr_free(e);
    if (fabs(v - 4.0 * sin(0.5)) > 1e-14 || fabs(h[3] + 4.0 * sin(0.5)) > 1e-14) {
        return 1;
    }
    if (confnet_expr_parse("r^", names, 2, &e) != CONFNET_STATUS_PARSE || confnet_last_error() == NULL) {
        return 1;
    }
    char *report = NULL;
    int32_t code = -1;
    if (confnet_run(NULL, "selftest", &report, &code) != CONFNET_STATUS_OK) {
        fprintf(stderr, "run: %s\n", confnet_last_error());
        return 1;
    }
    int ok = code == 0 && strstr(report, "\"outcome\":\"pass\"") != NULL;
    confnet_string_free(report);
    printf("ok\n");
    return ok ? 0 : 1;
}

#include <stdio.h>
#include "equidist.h"

int main(void) {
    EqFamily *phi = NULL;
    if (eq_family_from_preset("phi", 4, &phi) != EQ_STATUS_OK) {
        fprintf(stderr, "%s\n", eq_last_error());
        return 1;
    }
    EqVerdict v;
    eq_check_criterion(phi, 35, 0, &v, NULL);
    EqSieveReport *r = NULL;
    eq_sieve_run(phi, 1000000, 5, 1, "none", &r);
    printf("verdict %d, coprime %llu, discrepancy %.4f\n", (int)v,
           (unsigned long long)eq_sieve_report_coprime_total(r), eq_sieve_report_discrepancy(r));
    eq_sieve_report_free(r);
    eq_family_free(phi);
    return 0;
}

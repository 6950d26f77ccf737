/* Sequential differential runner: same input fill, single call.
 *
 * Usage: run_seq <seed> <out-file>
 */
#include <stdio.h>
#include <stdlib.h>

#include "kernels.h"
#include "harness_input.h"

void inference_sequential(const float *input, float *output);

static float in[SCHED_INPUT_ELEMENTS];
static float out[SCHED_OUTPUT_ELEMENTS];

int main(int argc, char **argv)
{
    if (argc != 3) {
        fprintf(stderr, "usage: %s <seed> <out-file>\n", argv[0]);
        return 2;
    }
    harness_fill(in, SCHED_INPUT_ELEMENTS, (unsigned)strtoul(argv[1], NULL, 10));
    inference_sequential(in, out);

    FILE *fh = fopen(argv[2], "wb");
    if (fh == NULL
        || fwrite(out, sizeof(float), SCHED_OUTPUT_ELEMENTS, fh)
               != SCHED_OUTPUT_ELEMENTS) {
        fprintf(stderr, "cannot write %s\n", argv[2]);
        return 4;
    }
    fclose(fh);
    return 0;
}

/* Parallel differential runner: one thread per generated core function.
 *
 * Usage: run_parallel <seed> <out-file>
 * Writes the raw output floats to <out-file> and prints one
 * "flag <name> <value>" line per channel after all threads joined.
 */
#include <pthread.h>
#include <stdio.h>
#include <stdlib.h>

#include "shared.h"
#include "harness_input.h"

static float in[SCHED_INPUT_ELEMENTS];
static float out[SCHED_OUTPUT_ELEMENTS];

static void *work(void *arg)
{
    sched_core_fn fn = *(const sched_core_fn *)arg;
    fn(in, out);
    return NULL;
}

int main(int argc, char **argv)
{
    if (argc != 3) {
        fprintf(stderr, "usage: %s <seed> <out-file>\n", argv[0]);
        return 2;
    }
    harness_fill(in, SCHED_INPUT_ELEMENTS, (unsigned)strtoul(argv[1], NULL, 10));

    pthread_t th[SCHED_CORES];
    for (int i = 0; i < SCHED_CORES; ++i) {
        if (pthread_create(&th[i], NULL, work, (void *)&sched_cores[i]) != 0) {
            fprintf(stderr, "pthread_create failed\n");
            return 3;
        }
    }
    for (int i = 0; i < SCHED_CORES; ++i) {
        pthread_join(th[i], NULL);
    }

    FILE *fh = fopen(argv[2], "wb");
    if (fh == NULL
        || fwrite(out, sizeof(float), SCHED_OUTPUT_ELEMENTS, fh)
               != SCHED_OUTPUT_ELEMENTS) {
        fprintf(stderr, "cannot write %s\n", argv[2]);
        return 4;
    }
    fclose(fh);

    for (int i = 0; i < sched_channel_count; ++i) {
        printf("flag %s %u\n", sched_channels[i].name,
               atomic_load(sched_channels[i].flag));
    }
    return 0;
}

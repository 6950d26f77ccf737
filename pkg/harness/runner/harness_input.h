#ifndef HARNESS_INPUT_H
#define HARNESS_INPUT_H

/* Both runners must produce the same input bytes for a given seed, so the
 * fill lives in one header. Plain LCG; quality does not matter, identical
 * bits do. */
static void harness_fill(float *dst, int n, unsigned seed)
{
    unsigned x = seed * 2654435761u + 1013904223u;
    for (int i = 0; i < n; ++i) {
        x = x * 1664525u + 1013904223u;
        dst[i] = (float)(x >> 8) / 16777216.0f - 0.5f;
    }
}

#endif

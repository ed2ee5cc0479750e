// SPDX-License-Identifier: GPL-2.0
#include <linux/kernel.h>

static int debug_level;

static void helper_reset(void)
{
	debug_level = 1;
}

static void __attribute__((unused)) dup_b_init(void)
{
	helper_reset();
}

static inline int dup_b_level(void)
{
	return debug_level;
}

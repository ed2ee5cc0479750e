// SPDX-License-Identifier: GPL-2.0
#include <linux/jiffies.h>

struct demo_timer {
	unsigned long expires;
	unsigned int timeout_ms;
};

static struct demo_timer demo_wd;

int demo_set_timeout(unsigned int user_ms)
{
	unsigned long expire;

	demo_wd.timeout_ms = user_ms;
	expire = jiffies + msecs_to_jiffies(user_ms);
	demo_wd.expires = expire;
	if (time_after(jiffies, expire))
		return -ETIME;
	return 0;
}

int demo_wait_done(void)
{
	while (!time_after(jiffies, demo_wd.expires))
		cpu_relax();
	return 0;
}

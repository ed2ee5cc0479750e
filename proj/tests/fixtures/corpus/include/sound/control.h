#ifndef __SOUND_CONTROL_H
#define __SOUND_CONTROL_H

#include <linux/list.h>

#define SNDRV_CTL_ELEM_ID_NAME_MAXLEN	44

#define list_for_each_entry(pos, head, member)				\
	for (pos = list_first_entry(head, typeof(*pos), member);	\
	     &pos->member != (head);					\
	     pos = list_next_entry(pos, member))

struct snd_ctl_elem_id {
	unsigned int numid;		/* numeric identifier, zero = invalid */
	int iface;			/* interface identifier */
	unsigned int device;		/* device/client number */
	unsigned int subdevice;		/* subdevice (substream) number */
	unsigned char name[SNDRV_CTL_ELEM_ID_NAME_MAXLEN];
	unsigned int index;		/* index of item */
};

struct snd_kcontrol {
	struct list_head list;		/* list of controls */
	struct snd_ctl_elem_id id;
	unsigned int count;		/* count of same elements */
	unsigned long private_value;
	void *private_data;
};

typedef struct {
	int lo;
	int hi;
} snd_range_t;

union snd_ctl_value {
	long integer[128];
	unsigned char bytes[512];
};

enum snd_ctl_iface {
	SNDRV_CTL_IFACE_CARD,
	SNDRV_CTL_IFACE_MIXER,
};

struct snd_card;

struct snd_kcontrol *snd_ctl_find_id(struct snd_card *card, struct snd_ctl_elem_id *id);
int snd_ctl_elem_write(struct snd_card *card, struct snd_ctl_elem_id *id, long *value);

extern int snd_ctl_debug;

#endif

// SPDX-License-Identifier: GPL-2.0-or-later
#include <sound/control.h>

struct snd_card {
	int number;
	struct list_head controls;
	unsigned int controls_count;
};

int snd_ctl_debug;
static struct snd_kcontrol *last_found;

static bool elem_id_matches(const struct snd_kcontrol *kctl,
			    const struct snd_ctl_elem_id *id)
{
	if (kctl->id.iface != id->iface)
		return false;
	if (strncmp(kctl->id.name, id->name, sizeof(kctl->id.name)))
		return false;
	if (kctl->id.device != id->device)
		return false;
	if (kctl->id.subdevice != id->subdevice)
		return false;
	return true;
}

struct snd_kcontrol *snd_ctl_find_numid(struct snd_card *card, unsigned int numid)
{
	struct snd_kcontrol *kctl;

	list_for_each_entry(kctl, &card->controls, list) {
		if (kctl->id.numid <= numid && kctl->id.numid + kctl->count > numid)
			return kctl;
	}
	return NULL;
}

struct snd_kcontrol *snd_ctl_find_id(struct snd_card *card,
				     struct snd_ctl_elem_id *id)
{
	struct snd_kcontrol *kctl;

	if (!card || !id)
		return NULL;
	if (id->numid != 0)
		return snd_ctl_find_numid(card, id->numid);
	list_for_each_entry(kctl, &card->controls, list) {
		if (!elem_id_matches(kctl, id))
			continue;
		if (kctl->id.index > id->index)
			continue;
		if (kctl->id.index + kctl->count <= id->index)
			continue;
		last_found = kctl;
		return kctl;
	}
	return NULL;
}

static unsigned int snd_ctl_get_ioff(struct snd_kcontrol *kctl,
				     struct snd_ctl_elem_id *id)
{
	return id->index - kctl->id.index;
}

int snd_ctl_elem_write(struct snd_card *card, struct snd_ctl_elem_id *id,
		       long *value)
{
	struct snd_kcontrol *kctl;
	unsigned int index_offset;

	kctl = snd_ctl_find_id(card, id);
	if (kctl == NULL)
		return -ENOENT;
	index_offset = snd_ctl_get_ioff(kctl, id);
	value[index_offset] = kctl->private_value;
	return 0;
}

int snd_ctl_elem_write_user(struct snd_card *card, void __user *arg)
{
	struct snd_ctl_elem_id id;
	long value[128];

	if (copy_from_user(&id, arg, sizeof(id)))
		return -EFAULT;
	return snd_ctl_elem_write(card, &id, value);
}
EXPORT_SYMBOL(snd_ctl_elem_write_user);

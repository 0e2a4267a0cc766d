"""
Signal handlers for trace export.
"""
import json
import logging
from pathlib import Path

from django.conf import settings
from django.db.models.signals import post_save
from django.dispatch import receiver

from agent.models import AgentRun

logger = logging.getLogger(__name__)


@receiver(post_save, sender=AgentRun)
def export_trace(sender, instance, created, **kwargs):
    """Write the run's trace JSON to TRACE_DIR when export on save is enabled."""
    options = settings.TSAGENT
    if not options['TRACE_EXPORT_ON_SAVE'] or not instance.trace:
        return
    directory = Path(options['TRACE_DIR'])
    try:
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / instance.trace_filename
        path.write_text(json.dumps(instance.trace, sort_keys=True, indent=2, ensure_ascii=False) + '\n', encoding='utf-8')
    except OSError as exc:
        logger.warning('Could not export trace of run %s: %s', instance.pk, exc)
        return
    logger.info('Exported trace of run %s to %s', instance.pk, path)

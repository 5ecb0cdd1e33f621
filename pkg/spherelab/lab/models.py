from django.db import models

KINDS = [
    'gibbs_sample',
    'overlap_unscaled',
    'overlap_scaled',
    'ultrametricity',
    'metastate_aw',
    'metastate_ns',
    'walk_diagnostics',
    'partition_check',
]


class ExperimentRun(models.Model):
    RUNNING = 'running'
    COMPLETED = 'completed'
    FAILED = 'failed'

    kind = models.CharField(max_length=255, choices=[(k, k) for k in KINDS])
    seed = models.CharField(max_length=20)
    config = models.JSONField()
    code_version = models.CharField(max_length=255)
    output_dir = models.CharField(max_length=1024)
    stage_seeds = models.JSONField(default=dict)
    status = models.CharField(
        max_length=255,
        choices=[(x, x) for x in [RUNNING, COMPLETED, FAILED]],
        default=RUNNING,
    )
    failed_stage = models.CharField(max_length=255, blank=True)
    error = models.TextField(blank=True)
    wall_clock = models.FloatField(null=True, blank=True)
    digest = models.CharField(max_length=64, blank=True)
    creation_date = models.DateTimeField(auto_now_add=True)
    modification_date = models.DateTimeField(auto_now=True)


class ResultFile(models.Model):
    JSON = 'json'
    JSONL = 'jsonl'
    CSV = 'csv'

    run = models.ForeignKey(
        ExperimentRun,
        related_name='files',
        on_delete=models.CASCADE,
    )
    name = models.CharField(max_length=255)
    path = models.CharField(max_length=1024)
    fmt = models.CharField(
        max_length=16,
        choices=[(x, x) for x in [JSON, JSONL, CSV]],
    )
    digest = models.CharField(max_length=64, blank=True)
    creation_date = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['name']
        unique_together = [('run', 'name')]


class ResultRecord(models.Model):
    ABSOLUTE = 'abs'
    AT_MOST = 'max'
    AT_LEAST = 'min'

    run = models.ForeignKey(
        ExperimentRun,
        related_name='records',
        on_delete=models.CASCADE,
    )
    criterion = models.PositiveIntegerField()
    metric = models.CharField(max_length=255)
    value = models.FloatField(null=True, blank=True)
    comparator = models.FloatField(null=True, blank=True)
    tolerance = models.FloatField()
    rule = models.CharField(
        max_length=8,
        choices=[(x, x) for x in [ABSOLUTE, AT_MOST, AT_LEAST]],
    )
    citation = models.TextField()
    passed = models.BooleanField(default=False)
    creation_date = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['criterion', 'metric']

    def evaluate(self):
        """
        Pass flag from the declared rule; a missing value or comparator
        fails.
        """
        if self.value is None or self.comparator is None:
            return False
        if self.rule == self.ABSOLUTE:
            return abs(self.value - self.comparator) <= self.tolerance
        if self.rule == self.AT_MOST:
            return self.value <= self.comparator + self.tolerance
        return self.value >= self.comparator - self.tolerance

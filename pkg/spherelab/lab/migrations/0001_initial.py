# Generated by Django 4.2.16 on 2026-10-18 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.AutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('kind', models.CharField(choices=[('gibbs_sample', 'gibbs_sample'), ('overlap_unscaled', 'overlap_unscaled'), ('overlap_scaled', 'overlap_scaled'), ('ultrametricity', 'ultrametricity'), ('metastate_aw', 'metastate_aw'), ('metastate_ns', 'metastate_ns'), ('walk_diagnostics', 'walk_diagnostics'), ('partition_check', 'partition_check')], max_length=255)),
                ('seed', models.CharField(max_length=20)),
                ('config', models.JSONField()),
                ('code_version', models.CharField(max_length=255)),
                ('output_dir', models.CharField(max_length=1024)),
                ('stage_seeds', models.JSONField(default=dict)),
                ('status', models.CharField(choices=[('running', 'running'), ('completed', 'completed'), ('failed', 'failed')], default='running', max_length=255)),
                ('failed_stage', models.CharField(blank=True, max_length=255)),
                ('error', models.TextField(blank=True)),
                ('wall_clock', models.FloatField(blank=True, null=True)),
                ('digest', models.CharField(blank=True, max_length=64)),
                ('creation_date', models.DateTimeField(auto_now_add=True)),
                ('modification_date', models.DateTimeField(auto_now=True)),
            ],
        ),
        migrations.CreateModel(
            name='ResultRecord',
            fields=[
                ('id', models.AutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('criterion', models.PositiveIntegerField()),
                ('metric', models.CharField(max_length=255)),
                ('value', models.FloatField(blank=True, null=True)),
                ('comparator', models.FloatField(blank=True, null=True)),
                ('tolerance', models.FloatField()),
                ('rule', models.CharField(choices=[('abs', 'abs'), ('max', 'max'), ('min', 'min')], max_length=8)),
                ('citation', models.TextField()),
                ('passed', models.BooleanField(default=False)),
                ('creation_date', models.DateTimeField(auto_now_add=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='records', to='lab.experimentrun')),
            ],
            options={
                'ordering': ['criterion', 'metric'],
            },
        ),
        migrations.CreateModel(
            name='ResultFile',
            fields=[
                ('id', models.AutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=255)),
                ('path', models.CharField(max_length=1024)),
                ('fmt', models.CharField(choices=[('json', 'json'), ('jsonl', 'jsonl'), ('csv', 'csv')], max_length=16)),
                ('digest', models.CharField(blank=True, max_length=64)),
                ('creation_date', models.DateTimeField(auto_now_add=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='files', to='lab.experimentrun')),
            ],
            options={
                'ordering': ['name'],
                'unique_together': {('run', 'name')},
            },
        ),
    ]

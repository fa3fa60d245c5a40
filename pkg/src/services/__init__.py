"""
Training, evaluation, dataset and harness services
"""
